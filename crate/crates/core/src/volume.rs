//! Dense multi-channel feature volumes, 2D feature maps and the sampling
//! primitives built on them.
//!
//! Values live at voxel (pixel) centers: continuous coordinate `k` is the
//! center of cell `k`. Samples outside `[0, n - 1]` on any axis are zero.

use rayon::prelude::*;

use crate::labels::{Label, NUM_LABELS};
use crate::{Error, Result};

/// `D × H × W × C` values, channels innermost.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVolume {
    dims: [usize; 3],
    channels: usize,
    data: Vec<f64>,
}

impl FeatureVolume {
    pub fn zeros(dims: [usize; 3], channels: usize) -> Self {
        let n = dims.iter().product::<usize>() * channels;
        FeatureVolume { dims, channels, data: vec![0.0; n] }
    }

    pub fn from_data(dims: [usize; 3], channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dims.iter().product::<usize>() * channels {
            return Err(Error::ShapeMismatch(format!(
                "{} values for dims {dims:?} x {channels} channels",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature volume"));
        }
        Ok(FeatureVolume { dims, channels, data })
    }

    /// Fills every voxel with the same channel vector.
    pub fn constant(dims: [usize; 3], value: &[f64]) -> Self {
        let n: usize = dims.iter().product();
        FeatureVolume { dims, channels: value.len(), data: value.repeat(n) }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn num_voxels(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn linear_index(&self, idx: [usize; 3]) -> usize {
        (idx[0] * self.dims[1] + idx[1]) * self.dims[2] + idx[2]
    }

    pub fn voxel(&self, idx: [usize; 3]) -> &[f64] {
        self.voxel_at(self.linear_index(idx))
    }

    pub fn voxel_mut(&mut self, idx: [usize; 3]) -> &mut [f64] {
        let i = self.linear_index(idx);
        self.voxel_at_mut(i)
    }

    pub fn voxel_at(&self, linear: usize) -> &[f64] {
        &self.data[linear * self.channels..(linear + 1) * self.channels]
    }

    pub fn voxel_at_mut(&mut self, linear: usize) -> &mut [f64] {
        let c = self.channels;
        &mut self.data[linear * c..(linear + 1) * c]
    }

    pub fn ensure_same_shape(&self, other: &FeatureVolume) -> Result<()> {
        if self.dims != other.dims || self.channels != other.channels {
            return Err(Error::ShapeMismatch(format!(
                "{:?}x{} vs {:?}x{}",
                self.dims, self.channels, other.dims, other.channels
            )));
        }
        Ok(())
    }

    /// Trilinear sample at continuous voxel coordinate `c = (z, y, x)`.
    pub fn sample(&self, c: [f64; 3]) -> Vec<f64> {
        let mut out = vec![0.0; self.channels];
        self.sample_into(c, &mut out);
        out
    }

    pub fn sample_into(&self, c: [f64; 3], out: &mut [f64]) {
        out.fill(0.0);
        let mut taps = [[(0usize, 0.0f64); 2]; 3];
        for axis in 0..3 {
            let v = c[axis];
            let n = self.dims[axis];
            if !(v >= 0.0 && v <= (n - 1) as f64) {
                return;
            }
            let i0 = (v.floor() as usize).min(n - 1);
            let f = v - i0 as f64;
            taps[axis] = [(i0, 1.0 - f), ((i0 + 1).min(n - 1), f)];
        }
        for &(z, wz) in &taps[0] {
            if wz == 0.0 {
                continue;
            }
            for &(y, wy) in &taps[1] {
                if wy == 0.0 {
                    continue;
                }
                for &(x, wx) in &taps[2] {
                    if wx == 0.0 {
                        continue;
                    }
                    let w = wz * wy * wx;
                    for (o, v) in out.iter_mut().zip(self.voxel([z, y, x])) {
                        *o += w * v;
                    }
                }
            }
        }
    }

    /// Applies a per-voxel affine channel map `out = W v + b` with `W` given
    /// row-major as `out_channels × channels`.
    pub fn map_channels(&self, weights: &[Vec<f64>], bias: Option<&[f64]>) -> Result<FeatureVolume> {
        if weights.iter().any(|row| row.len() != self.channels) {
            return Err(Error::ShapeMismatch(format!("channel map expects {} inputs", self.channels)));
        }
        let out_c = weights.len();
        let mut out = FeatureVolume::zeros(self.dims, out_c);
        out.data.par_chunks_mut(out_c).zip(self.data.par_chunks(self.channels)).for_each(|(o, v)| {
            for (k, row) in weights.iter().enumerate() {
                let mut acc = bias.map_or(0.0, |b| b[k]);
                for (w, x) in row.iter().zip(v) {
                    acc += w * x;
                }
                o[k] = acc;
            }
        });
        Ok(out)
    }

    /// Per-channel 3×3×3 convolution with zero padding. The kernel is
    /// indexed `[dz][dy][dx]` with offsets `-1..=1`.
    pub fn convolve3(&self, kernel: &[[[f64; 3]; 3]; 3]) -> FeatureVolume {
        let [d, h, w] = self.dims;
        let c = self.channels;
        let mut out = FeatureVolume::zeros(self.dims, c);
        let slab = h * w * c;
        out.data.par_chunks_mut(slab.max(1)).enumerate().for_each(|(z, plane)| {
            for y in 0..h {
                for x in 0..w {
                    let o = &mut plane[(y * w + x) * c..(y * w + x + 1) * c];
                    for (dz, kz) in kernel.iter().enumerate() {
                        let Some(zz) = (z + dz).checked_sub(1).filter(|&v| v < d) else { continue };
                        for (dy, ky) in kz.iter().enumerate() {
                            let Some(yy) = (y + dy).checked_sub(1).filter(|&v| v < h) else { continue };
                            for (dx, &k) in ky.iter().enumerate() {
                                let Some(xx) = (x + dx).checked_sub(1).filter(|&v| v < w) else { continue };
                                if k == 0.0 {
                                    continue;
                                }
                                for (acc, v) in o.iter_mut().zip(self.voxel([zz, yy, xx])) {
                                    *acc += k * v;
                                }
                            }
                        }
                    }
                }
            }
        });
        out
    }

    /// 2× mean pooling. Odd dims round up; partial blocks average the cells they cover.
    pub fn mean_pool2(&self) -> FeatureVolume {
        let out_dims = self.dims.map(|d| d.div_ceil(2));
        let c = self.channels;
        let mut out = FeatureVolume::zeros(out_dims, c);
        let [od, oh, ow] = out_dims;
        let slab = oh * ow * c;
        out.data.par_chunks_mut(slab.max(1)).enumerate().take(od).for_each(|(z, plane)| {
            for y in 0..oh {
                for x in 0..ow {
                    let o = &mut plane[(y * ow + x) * c..(y * ow + x + 1) * c];
                    let mut count = 0.0;
                    for zz in 2 * z..(2 * z + 2).min(self.dims[0]) {
                        for yy in 2 * y..(2 * y + 2).min(self.dims[1]) {
                            for xx in 2 * x..(2 * x + 2).min(self.dims[2]) {
                                count += 1.0;
                                for (acc, v) in o.iter_mut().zip(self.voxel([zz, yy, xx])) {
                                    *acc += v;
                                }
                            }
                        }
                    }
                    o.iter_mut().for_each(|v| *v /= count);
                }
            }
        });
        out
    }

    /// Trilinear resize with centers aligned (`s = (t + 0.5) n / m - 0.5`),
    /// source coordinates clamped to the valid range.
    pub fn resize_trilinear(&self, target: [usize; 3]) -> FeatureVolume {
        let axes = ResampleAxes::new(self.dims, target);
        let c = self.channels;
        let mut out = FeatureVolume::zeros(target, c);
        let slab = target[1] * target[2] * c;
        out.data.par_chunks_mut(slab.max(1)).enumerate().for_each(|(z, plane)| {
            for y in 0..target[1] {
                for x in 0..target[2] {
                    let o = &mut plane[(y * target[2] + x) * c..(y * target[2] + x + 1) * c];
                    axes.interpolate(self, [z, y, x], o);
                }
            }
        });
        out
    }

    /// Concatenates channel vectors of equally sized volumes.
    pub fn concat_channels(parts: &[&FeatureVolume]) -> Result<FeatureVolume> {
        let dims = parts.first().map(|p| p.dims).unwrap_or([0; 3]);
        if parts.iter().any(|p| p.dims != dims) {
            return Err(Error::ShapeMismatch("concat of volumes with different dims".into()));
        }
        let c: usize = parts.iter().map(|p| p.channels).sum();
        let n: usize = dims.iter().product();
        let mut data = Vec::with_capacity(n * c);
        for i in 0..n {
            for p in parts {
                data.extend_from_slice(p.voxel_at(i));
            }
        }
        Ok(FeatureVolume { dims, channels: c, data })
    }
}

/// Per-axis interpolation taps for a center-aligned resize from `src` to `dst`.
#[derive(Clone, Debug)]
pub struct ResampleAxes {
    taps: [Vec<(usize, usize, f64)>; 3],
}

impl ResampleAxes {
    pub fn new(src: [usize; 3], dst: [usize; 3]) -> Self {
        let axis = |n: usize, m: usize| -> Vec<(usize, usize, f64)> {
            (0..m)
                .map(|t| {
                    let s = ((t as f64 + 0.5) * n as f64 / m as f64 - 0.5).clamp(0.0, (n - 1) as f64);
                    let i0 = (s.floor() as usize).min(n - 1);
                    let f = s - i0 as f64;
                    (i0, (i0 + 1).min(n - 1), f)
                })
                .collect()
        };
        ResampleAxes { taps: [axis(src[0], dst[0]), axis(src[1], dst[1]), axis(src[2], dst[2])] }
    }

    /// Source coordinate (before clamping is applied this equals the center-aligned map).
    pub fn source_coord(&self, t: [usize; 3]) -> [f64; 3] {
        [0, 1, 2].map(|a| {
            let (i0, _, f) = self.taps[a][t[a]];
            i0 as f64 + f
        })
    }

    pub fn interpolate(&self, vol: &FeatureVolume, t: [usize; 3], out: &mut [f64]) {
        out.fill(0.0);
        let (z0, z1, fz) = self.taps[0][t[0]];
        let (y0, y1, fy) = self.taps[1][t[1]];
        let (x0, x1, fx) = self.taps[2][t[2]];
        for (z, wz) in [(z0, 1.0 - fz), (z1, fz)] {
            if wz == 0.0 {
                continue;
            }
            for (y, wy) in [(y0, 1.0 - fy), (y1, fy)] {
                if wy == 0.0 {
                    continue;
                }
                for (x, wx) in [(x0, 1.0 - fx), (x1, fx)] {
                    if wx == 0.0 {
                        continue;
                    }
                    let w = wz * wy * wx;
                    for (o, v) in out.iter_mut().zip(vol.voxel([z, y, x])) {
                        *o += w * v;
                    }
                }
            }
        }
    }
}

/// Checks an 18-channel volume holds per-voxel distributions (sum 1 ± `tol`).
pub fn validate_distribution(probs: &FeatureVolume, tol: f64) -> Result<()> {
    if probs.channels() != NUM_LABELS {
        return Err(Error::InvalidDistribution(format!("expected 18 channels, got {}", probs.channels())));
    }
    for (i, p) in probs.data().chunks(NUM_LABELS).enumerate() {
        let sum: f64 = p.iter().sum();
        if p.iter().any(|&v| v < 0.0) || (sum - 1.0).abs() > tol {
            return Err(Error::InvalidDistribution(format!("voxel {i} sums to {sum}")));
        }
    }
    Ok(())
}

/// Resizes a probability volume to `target` dims with per-channel trilinear
/// interpolation (centers aligned) and renormalizes every voxel.
pub fn resample_probabilities(probs: &FeatureVolume, target: [usize; 3]) -> Result<FeatureVolume> {
    validate_distribution(probs, 1e-6)?;
    if target == probs.dims() {
        return Ok(probs.clone());
    }
    let mut out = probs.resize_trilinear(target);
    for (i, p) in out.data_mut().chunks_mut(NUM_LABELS).enumerate() {
        let sum: f64 = p.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::ZeroSum(i));
        }
        p.iter_mut().for_each(|v| *v /= sum);
    }
    Ok(out)
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Argmax over channels, skipping the noise channel when `allow_noise` is false.
pub fn argmax_label(p: &[f64], allow_noise: bool) -> Label {
    if allow_noise {
        Label::from_channel(argmax(p))
    } else {
        Label::from_channel(1 + argmax(&p[1..]))
    }
}

/// Per-voxel argmax of an 18-channel volume.
pub fn argmax_labels(probs: &FeatureVolume) -> Result<Vec<Label>> {
    if probs.channels() != NUM_LABELS {
        return Err(Error::InvalidDistribution(format!("expected 18 channels, got {}", probs.channels())));
    }
    Ok(probs.data().par_chunks(NUM_LABELS).map(|p| argmax_label(p, true)).collect())
}

/// Resamples to `target` dims and takes the argmax, one output slab at a
/// time so that full-resolution probabilities are never materialized.
/// Renormalization is skipped because it does not move the argmax.
pub fn upsample_argmax(probs: &FeatureVolume, target: [usize; 3], allow_noise: bool) -> Result<Vec<Label>> {
    validate_distribution(probs, 1e-6)?;
    let axes = ResampleAxes::new(probs.dims(), target);
    let plane = target[1] * target[2];
    let mut labels = vec![Label::EMPTY; plane * target[0]];
    labels.par_chunks_mut(plane.max(1)).enumerate().for_each(|(z, slab)| {
        let mut p = [0.0; NUM_LABELS];
        for y in 0..target[1] {
            for x in 0..target[2] {
                axes.interpolate(probs, [z, y, x], &mut p);
                slab[y * target[2] + x] = argmax_label(&p, allow_noise);
            }
        }
    });
    Ok(labels)
}

/// Numerically stable softmax in place.
pub fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in logits.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    logits.iter_mut().for_each(|v| *v /= sum);
}

/// Per-view 2D features, `H × W × C` row-major, pixel centers at integers.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageFeatureMap {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageFeatureMap {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        ImageFeatureMap { height, width, channels, data: vec![0.0; height * width * channels] }
    }

    pub fn from_data(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(Error::ShapeMismatch("image feature map size".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("image feature map"));
        }
        Ok(ImageFeatureMap { height, width, channels, data })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixel(&self, u: usize, v: usize) -> &[f64] {
        let i = (v * self.width + u) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn pixel_mut(&mut self, u: usize, v: usize) -> &mut [f64] {
        let i = (v * self.width + u) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    /// Bilinear sample at `(u, v)`; all-zero outside `[0, W-1] × [0, H-1]`.
    pub fn sample(&self, uv: [f64; 2]) -> Vec<f64> {
        let mut out = vec![0.0; self.channels];
        self.sample_into(uv, &mut out);
        out
    }

    pub fn sample_into(&self, uv: [f64; 2], out: &mut [f64]) {
        out.fill(0.0);
        let [u, v] = uv;
        if !(u >= 0.0 && u <= (self.width - 1) as f64 && v >= 0.0 && v <= (self.height - 1) as f64) {
            return;
        }
        let u0 = (u.floor() as usize).min(self.width - 1);
        let v0 = (v.floor() as usize).min(self.height - 1);
        let fu = u - u0 as f64;
        let fv = v - v0 as f64;
        let u1 = (u0 + 1).min(self.width - 1);
        let v1 = (v0 + 1).min(self.height - 1);
        for (vv, wv) in [(v0, 1.0 - fv), (v1, fv)] {
            if wv == 0.0 {
                continue;
            }
            for (uu, wu) in [(u0, 1.0 - fu), (u1, fu)] {
                if wu == 0.0 {
                    continue;
                }
                let w = wu * wv;
                for (o, x) in out.iter_mut().zip(self.pixel(uu, vv)) {
                    *o += w * x;
                }
            }
        }
    }
}

/// Free-function form of [`ImageFeatureMap::sample`].
pub fn bilinear_sample_2d(map: &ImageFeatureMap, uv: [f64; 2]) -> Vec<f64> {
    map.sample(uv)
}

/// Free-function form of [`FeatureVolume::sample`].
pub fn trilinear_sample_3d(vol: &FeatureVolume, c: [f64; 3]) -> Vec<f64> {
    vol.sample(c)
}

/// The normalized 3×3×3 box kernel.
pub fn box_kernel() -> [[[f64; 3]; 3]; 3] {
    [[[1.0 / 27.0; 3]; 3]; 3]
}
