//! Analytic multiply-add and memory model of the baselines and the refinement stage.
//!
//! Voxel counts are real-valued (`V_i = V_0 / 8^i`), so every dense term
//! scales exactly with `1 / S³`.

use serde::{Deserialize, Serialize};

use super::{EncoderConfig, Modality, CAMERA_RAW_CHANNELS, DECODER_SCALES, LIDAR_RAW_CHANNELS};
use crate::grid::GridSpec;
use crate::labels::NUM_LABELS;

/// Camera views sampled per query.
const VIEWS: f64 = 6.0;
/// Multiply-adds to transform and project one point into one view.
const PROJECT_OPS: f64 = 15.0;
/// Hidden width of the fine fusion maps.
pub const FINE_HIDDEN: usize = NUM_LABELS;
const BYTES: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "stage")]
pub enum Stage {
    Encode { modality: Modality },
    Decode,
    /// Refinement of `occupied` coarse voxels split `eta` times per axis.
    Refine { modality: Modality, occupied: usize, eta: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub stage: Stage,
    pub flops: f64,
    pub bytes: f64,
}

fn coarse_voxels(cfg: &EncoderConfig, spec: &GridSpec) -> f64 {
    let s = cfg.stride as f64;
    spec.dims.iter().map(|&d| d as f64).product::<f64>() / (s * s * s)
}

fn conv_ops(channels: f64) -> f64 {
    27.0 * channels
}

/// Multiply-add count of one stage.
pub fn flop_count(cfg: &EncoderConfig, spec: &GridSpec, stage: Stage) -> f64 {
    let c = cfg.channels as f64;
    let v0 = coarse_voxels(cfg, spec);
    let labels = NUM_LABELS as f64;
    match stage {
        Stage::Encode { modality } => {
            let lidar = v0 * (LIDAR_RAW_CHANNELS as f64 * c + conv_ops(c));
            let camera = v0 * (CAMERA_RAW_CHANNELS as f64 * c + conv_ops(c));
            // Two branch convolutions, the concat convolution, the channel mix and the blend.
            let fusion = v0 * (2.0 * conv_ops(c) + conv_ops(2.0 * c) + 2.0 * c * c + 2.0 * c);
            match modality {
                Modality::Lidar => lidar,
                Modality::Camera => camera,
                Modality::Multimodal => lidar + camera + fusion,
            }
        }
        Stage::Decode => {
            let mut ops = 0.0;
            let mut v = v0;
            for _ in 1..DECODER_SCALES {
                v /= 8.0;
                // 2×2×2 pooling into the coarser level, then 8-tap upsampling back to V_0.
                ops += v * 8.0 * c + v0 * 8.0 * c;
            }
            ops + v0 * (DECODER_SCALES as f64 * c * labels + labels)
        }
        Stage::Refine { modality, occupied, eta } => {
            let queries = (occupied * eta * eta * eta) as f64;
            let h = FINE_HIDDEN as f64;
            let geometric = 8.0 * c + c * h;
            let semantic = if modality.uses_camera() {
                let s = CAMERA_RAW_CHANNELS as f64;
                VIEWS * (PROJECT_OPS + 4.0 * s) + s + s * h
            } else {
                0.0
            };
            queries * (geometric + semantic + h + h * labels + labels)
        }
    }
}

/// Peak bytes of the stage's live tensors (f64 storage).
pub fn memory_bytes(cfg: &EncoderConfig, spec: &GridSpec, stage: Stage) -> f64 {
    let c = cfg.channels as f64;
    let v0 = coarse_voxels(cfg, spec);
    let labels = NUM_LABELS as f64;
    match stage {
        Stage::Encode { modality } => {
            let branch = v0 * 2.0 * c;
            BYTES
                * match modality {
                    Modality::Lidar | Modality::Camera => branch,
                    Modality::Multimodal => 2.0 * branch + v0 * (2.0 * c + 2.0 * 2.0 * c + c + c),
                }
        }
        Stage::Decode => BYTES * v0 * (c * (1.0 + 1.0 / 8.0 + 1.0 / 64.0) + labels),
        Stage::Refine { modality, occupied, eta } => {
            let queries = (occupied * eta * eta * eta) as f64;
            let semantic = if modality.uses_camera() { CAMERA_RAW_CHANNELS as f64 } else { 0.0 };
            // Coordinates, parent and fine index, both branch features and the distribution.
            BYTES * queries * (3.0 + 2.0 + semantic + c + labels)
        }
    }
}

impl CostReport {
    pub fn new(cfg: &EncoderConfig, spec: &GridSpec, stage: Stage) -> Self {
        CostReport { stage, flops: flop_count(cfg, spec, stage), bytes: memory_bytes(cfg, spec, stage) }
    }
}
