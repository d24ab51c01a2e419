//! End-to-end baseline forward passes.

use super::{adaptive_fuse_with, camera_encode, decode_and_head, lidar_encode, EncoderConfig, HeadConfig, Modality};
use crate::grid::{DenseLabelGrid, GridSpec};
use crate::synth::FrameSensorData;
use crate::volume::{upsample_argmax, FeatureVolume};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineOutput {
    pub modality: Modality,
    /// Grid of `features` and `probs` (input grid at stride `S`).
    pub coarse_spec: GridSpec,
    /// Encoder output fed to the decoder (`F^L`, `F^C` or `F^F`).
    pub features: FeatureVolume,
    /// Per-voxel 18-way distribution.
    pub probs: FeatureVolume,
}

/// Encoder features of the chosen branch (or the fusion of both).
pub fn encode_frame(frame: &FrameSensorData, modality: Modality, spec: &GridSpec, cfg: &EncoderConfig) -> Result<FeatureVolume> {
    let lidar = || lidar_encode(&frame.point_cloud, spec, cfg);
    let camera = || {
        if !frame.has_depth() {
            return Err(Error::MissingDepth(modality.name()));
        }
        camera_encode(&frame.semantic_images, &frame.depth_images, &frame.cameras, spec, cfg)
    };
    match modality {
        Modality::Lidar => lidar(),
        Modality::Camera => camera(),
        Modality::Multimodal => {
            let (fl, fc) = (lidar()?, camera()?);
            adaptive_fuse_with(&fl, &fc, &cfg.fusion)
        }
    }
}

pub fn baseline_forward(
    frame: &FrameSensorData,
    modality: Modality,
    spec: &GridSpec,
    cfg: &EncoderConfig,
    head: &HeadConfig,
) -> Result<BaselineOutput> {
    let features = encode_frame(frame, modality, spec, cfg)?;
    let probs = decode_and_head(&features, cfg, head)?;
    Ok(BaselineOutput { modality, coarse_spec: cfg.coarse_spec(spec), features, probs })
}

/// Labels on `spec` from trilinearly upsampled probabilities; never emits noise.
pub fn predict_labels(output: &BaselineOutput, spec: &GridSpec) -> Result<DenseLabelGrid> {
    let labels = upsample_argmax(&output.probs, spec.dims, false)?;
    DenseLabelGrid::from_labels(*spec, labels)
}
