//! Adaptive gated fusion of the LiDAR and camera volumes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::FUSED_CHANNELS;
use crate::volume::{box_kernel, FeatureVolume};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    /// Kernel of the per-channel convolution `G_C`, indexed `[dz][dy][dx]`.
    pub kernel: [[[f64; 3]; 3]; 3],
    /// Channel-halving mix `C × 2C` applied to `[G_C(F^L), G_C(F^C)]`.
    pub mix: Vec<Vec<f64>>,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig::contrast(FUSED_CHANNELS, 8.0)
    }
}

impl FusionConfig {
    /// `W_c = kappa * (G(F^L)_c - G(F^C)_c)` after the second convolution.
    pub fn contrast(channels: usize, kappa: f64) -> Self {
        let mix = (0..channels)
            .map(|c| {
                let mut row = vec![0.0; 2 * channels];
                row[c] = kappa;
                row[channels + c] = -kappa;
                row
            })
            .collect();
        FusionConfig { kernel: box_kernel(), mix }
    }

    pub fn validate(&self, channels: usize) -> Result<()> {
        if self.mix.len() != channels || self.mix.iter().any(|r| r.len() != 2 * channels) {
            return Err(Error::InvalidConfig(format!("fusion mix must be {channels}x{}", 2 * channels)));
        }
        let finite = self.kernel.iter().flatten().flatten().chain(self.mix.iter().flatten()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("fusion coefficients"));
        }
        Ok(())
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// The gate volume `W`.
pub fn fusion_gate(fl: &FeatureVolume, fc: &FeatureVolume, cfg: &FusionConfig) -> Result<FeatureVolume> {
    fl.ensure_same_shape(fc)?;
    cfg.validate(fl.channels())?;
    let a = fl.convolve3(&cfg.kernel);
    let b = fc.convolve3(&cfg.kernel);
    let cat = FeatureVolume::concat_channels(&[&a, &b])?;
    cat.convolve3(&cfg.kernel).map_channels(&cfg.mix, None)
}

/// `F^F = σ(W) ⊙ F^L + (1 − σ(W)) ⊙ F^C` with the default gate.
pub fn adaptive_fuse(fl: &FeatureVolume, fc: &FeatureVolume) -> Result<FeatureVolume> {
    adaptive_fuse_with(fl, fc, &FusionConfig::contrast(fl.channels(), 8.0))
}

pub fn adaptive_fuse_with(fl: &FeatureVolume, fc: &FeatureVolume, cfg: &FusionConfig) -> Result<FeatureVolume> {
    let gate = fusion_gate(fl, fc, cfg)?;
    let mut out = fc.clone();
    out.data_mut().par_iter_mut().zip(fl.data().par_iter()).zip(gate.data().par_iter()).for_each(|((o, &a), &w)| {
        let b = *o;
        // Written as b + s (a - b) so equal operands pass through exactly;
        // the clamp absorbs rounding at the interval ends.
        *o = (b + sigmoid(w) * (a - b)).clamp(a.min(b), a.max(b));
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_kernel_gives_half_blend() {
        let fl = FeatureVolume::constant([2, 2, 2], &[1.0; FUSED_CHANNELS]);
        let fc = FeatureVolume::zeros([2, 2, 2], FUSED_CHANNELS);
        let cfg = FusionConfig { kernel: [[[0.0; 3]; 3]; 3], ..FusionConfig::default() };
        let f = adaptive_fuse_with(&fl, &fc, &cfg).unwrap();
        assert!(f.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn equal_inputs_pass_through() {
        let data: Vec<f64> = (0..8 * FUSED_CHANNELS).map(|i| (i as f64 * 0.37).sin()).collect();
        let v = FeatureVolume::from_data([2, 2, 2], FUSED_CHANNELS, data).unwrap();
        assert_eq!(adaptive_fuse(&v, &v).unwrap(), v);
        let z = FeatureVolume::zeros([2, 2, 2], FUSED_CHANNELS);
        assert_eq!(adaptive_fuse(&z, &z).unwrap(), z);
    }

    #[test]
    fn shape_mismatch() {
        let a = FeatureVolume::zeros([2, 2, 2], 16);
        let b = FeatureVolume::zeros([2, 2, 1], 16);
        assert!(adaptive_fuse(&a, &b).is_err());
    }
}
