//! Semantic occupancy toolkit.
//!
//! Voxel grids and geometry, a synthetic street-scene generator with
//! simulated LiDAR and cameras, the augment-and-purify annotation pipeline,
//! fixed-weight occupancy baselines, cascade refinement, losses and the
//! evaluation protocol.

mod error;

pub mod aap;
pub mod conet;
pub mod eval;
pub mod fit;
pub mod geometry;
pub mod grid;
pub mod labels;
pub mod losses;
pub mod net;
pub mod synth;
pub mod volume;

pub use error::{Error, Result};
pub use geometry::{BoundingBox, CameraModel, Intrinsics, Pose};
pub use grid::{DenseLabelGrid, GridSpec, SparseOccupancy, SparseRecord};
pub use labels::{Label, NUM_LABELS, NUM_SEMANTIC};
pub use volume::{FeatureVolume, ImageFeatureMap};
