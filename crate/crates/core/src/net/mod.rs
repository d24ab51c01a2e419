//! Fixed-weight occupancy baselines: LiDAR and camera voxel encoders,
//! adaptive fusion, a three-scale decoder and a linear occupancy head.

mod cost;
mod encode;
mod forward;
mod fuse;
mod head;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::grid::GridSpec;
use crate::{Error, Result};

pub use cost::{flop_count, memory_bytes, CostReport, Stage};
pub use encode::{
    camera_encode, camera_projection, camera_raw_pixel, image_feature_maps, lidar_encode, lidar_projection, lidar_raw_voxels, CAMERA_RAW_CHANNELS,
    LIDAR_RAW_CHANNELS,
};
pub use forward::{baseline_forward, encode_frame, predict_labels, BaselineOutput};
pub use fuse::{adaptive_fuse, adaptive_fuse_with, fusion_gate, FusionConfig};
pub use head::{decode_and_head, HeadConfig, LinearMap, MultiScale};

/// Fused feature channels shared by both branches.
pub const FUSED_CHANNELS: usize = 16;
/// Decoder scales `F_0, F_1, F_2`.
pub const DECODER_SCALES: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Camera,
    Lidar,
    Multimodal,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Camera, Modality::Lidar, Modality::Multimodal];

    pub fn name(self) -> &'static str {
        match self {
            Modality::Camera => "camera",
            Modality::Lidar => "lidar",
            Modality::Multimodal => "multimodal",
        }
    }

    pub fn uses_camera(self) -> bool {
        self != Modality::Lidar
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "camera" => Ok(Modality::Camera),
            "lidar" => Ok(Modality::Lidar),
            "multimodal" => Ok(Modality::Multimodal),
            other => Err(Error::InvalidConfig(format!("unknown modality {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    /// Output stride `S` relative to the input grid.
    pub stride: usize,
    /// Fused channel count `C`.
    pub channels: usize,
    pub fusion: FusionConfig,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig { stride: 4, channels: FUSED_CHANNELS, fusion: FusionConfig::default() }
    }
}

impl EncoderConfig {
    pub fn with_stride(stride: usize) -> Self {
        EncoderConfig { stride, ..EncoderConfig::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.stride, 2 | 4) {
            return Err(Error::InvalidConfig(format!("stride must be 2 or 4, got {}", self.stride)));
        }
        if self.channels != FUSED_CHANNELS {
            return Err(Error::InvalidConfig(format!("channels must be {FUSED_CHANNELS}")));
        }
        self.fusion.validate(self.channels)
    }

    /// Checks the grid splits evenly into stride-`S` blocks.
    pub fn validate_for(&self, spec: &GridSpec) -> Result<()> {
        self.validate()?;
        if spec.dims.iter().any(|d| d % self.stride != 0) {
            return Err(Error::InvalidConfig(format!("dims {:?} not divisible by stride {}", spec.dims, self.stride)));
        }
        Ok(())
    }

    pub fn coarse_spec(&self, spec: &GridSpec) -> GridSpec {
        spec.downsampled(self.stride)
    }
}
