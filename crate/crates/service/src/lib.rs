//! Persistence, annotation service and command-line driver for the occupancy pipeline.

pub mod cli;
pub mod http;
pub mod occ1;
pub mod store;
pub mod views;
