//! Three-scale decoder and the linear occupancy head.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{EncoderConfig, Modality, DECODER_SCALES};
use crate::labels::NUM_LABELS;
use crate::volume::{softmax_in_place, FeatureVolume, ResampleAxes};
use crate::{Error, Result};

/// Dense affine map `y = W x + b`, `W` stored row-major as `output × input`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearMap {
    pub input: usize,
    pub output: usize,
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl LinearMap {
    pub fn zeros(input: usize, output: usize) -> Self {
        LinearMap { input, output, weights: vec![vec![0.0; input]; output], bias: vec![0.0; output] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != self.output
            || self.bias.len() != self.output
            || self.weights.iter().any(|r| r.len() != self.input)
        {
            return Err(Error::ShapeMismatch(format!("linear map declared {}→{}", self.input, self.output)));
        }
        if self.weights.iter().flatten().chain(&self.bias).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("linear map coefficients"));
        }
        Ok(())
    }

    /// Writes `W x + b` into `out`.
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for ((o, row), b) in out.iter_mut().zip(&self.weights).zip(&self.bias) {
            let mut acc = *b;
            for (w, v) in row.iter().zip(x) {
                acc += w * v;
            }
            *o = acc;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.output];
        self.apply_into(x, &mut out);
        out
    }
}

/// Linear head from decoder features to 18 logits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadConfig {
    pub channels: usize,
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    /// Where the coefficients were loaded from.
    #[serde(skip)]
    pub provenance: Option<String>,
}

macro_rules! shipped_head {
    ($name:literal) => {
        ($name, include_str!(concat!("../../assets/", $name)))
    };
}

impl HeadConfig {
    pub fn validate(&self) -> Result<()> {
        LinearMap { input: self.channels, output: NUM_LABELS, weights: self.weights.clone(), bias: self.bias.clone() }
            .validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let head: HeadConfig = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        head.validate()?;
        Ok(head)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let mut head = HeadConfig::from_json(&text)?;
        head.provenance = Some(path.display().to_string());
        Ok(head)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("head serializes")
    }

    /// The coefficients shipped with the crate for a modality and stride.
    pub fn shipped(modality: Modality, stride: usize) -> Result<Self> {
        let (name, text) = match (modality, stride) {
            (Modality::Camera, 2) => shipped_head!("head_camera_s2.json"),
            (Modality::Camera, 4) => shipped_head!("head_camera_s4.json"),
            (Modality::Lidar, 2) => shipped_head!("head_lidar_s2.json"),
            (Modality::Lidar, 4) => shipped_head!("head_lidar_s4.json"),
            (Modality::Multimodal, 2) => shipped_head!("head_multimodal_s2.json"),
            (Modality::Multimodal, 4) => shipped_head!("head_multimodal_s4.json"),
            _ => return Err(Error::InvalidConfig(format!("no shipped head for stride {stride}"))),
        };
        let mut head = HeadConfig::from_json(text)?;
        head.provenance = Some(format!("assets/{name}"));
        Ok(head)
    }

    pub fn logits_into(&self, features: &[f64], out: &mut [f64]) {
        for ((o, row), b) in out.iter_mut().zip(&self.weights).zip(&self.bias) {
            let mut acc = *b;
            for (w, v) in row.iter().zip(features) {
                acc += w * v;
            }
            *o = acc;
        }
    }
}

/// `F_0` with its pooled scales `F_1`, `F_2`, read back at `F_0` resolution.
pub struct MultiScale<'a> {
    f0: &'a FeatureVolume,
    levels: Vec<(FeatureVolume, ResampleAxes)>,
}

impl<'a> MultiScale<'a> {
    pub fn new(f0: &'a FeatureVolume) -> Self {
        let mut levels: Vec<(FeatureVolume, ResampleAxes)> = Vec::with_capacity(DECODER_SCALES - 1);
        for _ in 1..DECODER_SCALES {
            let pooled = levels.last().map_or(f0, |l| &l.0).mean_pool2();
            let axes = ResampleAxes::new(pooled.dims(), f0.dims());
            levels.push((pooled, axes));
        }
        MultiScale { f0, levels }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.f0.dims()
    }

    /// Concatenated channel count `ΣC_i`.
    pub fn channels(&self) -> usize {
        self.f0.channels() * DECODER_SCALES
    }

    /// Upsampled, concatenated features of voxel `idx`.
    pub fn features_at(&self, idx: [usize; 3], out: &mut [f64]) {
        let c = self.f0.channels();
        out[..c].copy_from_slice(self.f0.voxel(idx));
        for (i, (vol, axes)) in self.levels.iter().enumerate() {
            axes.interpolate(vol, idx, &mut out[(i + 1) * c..(i + 2) * c]);
        }
    }
}

/// Multi-scale decode, linear head and softmax; output has 18 channels.
pub fn decode_and_head(features: &FeatureVolume, cfg: &EncoderConfig, head: &HeadConfig) -> Result<FeatureVolume> {
    if features.channels() != cfg.channels {
        return Err(Error::ShapeMismatch(format!("expected {} feature channels", cfg.channels)));
    }
    head.validate()?;
    let ms = MultiScale::new(features);
    if head.channels != ms.channels() {
        return Err(Error::ShapeMismatch(format!("head expects {} channels, decoder gives {}", head.channels, ms.channels())));
    }
    let [_, h, w] = features.dims();
    let mut out = FeatureVolume::zeros(features.dims(), NUM_LABELS);
    out.data_mut().par_chunks_mut(h * w * NUM_LABELS).enumerate().for_each(|(z, plane)| {
        let mut buf = vec![0.0; ms.channels()];
        for (i, p) in plane.chunks_mut(NUM_LABELS).enumerate() {
            ms.features_at([z, i / w, i % w], &mut buf);
            head.logits_into(&buf, p);
            softmax_in_place(p);
        }
    });
    Ok(out)
}
