//! Weighted ridge least squares used to fit the shipped head and fine-fusion
//! coefficients from synthetic scenes.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::conet::{query_features, FineFusionConfig};
use crate::grid::{DenseLabelGrid, GridSpec};
use crate::labels::{Label, NUM_LABELS};
use crate::net::{encode_frame, EncoderConfig, HeadConfig, LinearMap, Modality, MultiScale};
use crate::synth::FrameSensorData;
use crate::volume::{resample_probabilities, FeatureVolume};
use crate::{Error, Result};

/// Normal equations of `min Σ w‖W x + b − y‖² + λ‖W‖²`.
#[derive(Clone, Debug)]
pub struct RidgeAccumulator {
    inputs: usize,
    outputs: usize,
    xtx: DMatrix<f64>,
    xty: DMatrix<f64>,
    samples: usize,
}

impl RidgeAccumulator {
    pub fn new(inputs: usize, outputs: usize) -> Self {
        RidgeAccumulator {
            inputs,
            outputs,
            xtx: DMatrix::zeros(inputs + 1, inputs + 1),
            xty: DMatrix::zeros(inputs + 1, outputs),
            samples: 0,
        }
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn add(&mut self, x: &[f64], y: &[f64], weight: f64) {
        let n = self.inputs;
        for i in 0..=n {
            let xi = if i < n { x[i] } else { 1.0 } * weight;
            if xi == 0.0 {
                continue;
            }
            for j in 0..=n {
                let xj = if j < n { x[j] } else { 1.0 };
                self.xtx[(i, j)] += xi * xj;
            }
            for (k, &yk) in y.iter().enumerate() {
                self.xty[(i, k)] += xi * yk;
            }
        }
        self.samples += 1;
    }

    pub fn merge(self, other: &RidgeAccumulator) -> Self {
        self.merge_scaled(other, 1.0)
    }

    /// Adds `other` with every sample weight multiplied by `weight`.
    pub fn merge_scaled(mut self, other: &RidgeAccumulator, weight: f64) -> Self {
        self.xtx += &other.xtx * weight;
        self.xty += &other.xty * weight;
        self.samples += other.samples;
        self
    }

    /// Solves for `W` (`outputs × inputs`) and `b`; the bias is not penalized.
    pub fn solve(&self, lambda: f64) -> Result<LinearMap> {
        let n = self.inputs;
        let mut a = self.xtx.clone();
        let scale = (0..n).map(|i| a[(i, i)]).sum::<f64>() / n.max(1) as f64;
        for i in 0..n {
            a[(i, i)] += lambda * scale.max(1e-12);
        }
        let sol = a.cholesky().ok_or_else(|| Error::InvalidConfig("ridge system not positive definite".into()))?.solve(&self.xty);
        let weights = (0..self.outputs).map(|k| (0..n).map(|i| sol[(i, k)]).collect()).collect();
        let bias = (0..self.outputs).map(|k| sol[(n, k)]).collect();
        let map = LinearMap { input: n, output: self.outputs, weights, bias };
        map.validate()?;
        Ok(map)
    }
}

/// Settings shared by head and fine fitting.
#[derive(Clone, Debug)]
pub struct FitOptions {
    pub lambda: f64,
    /// Exponent of the inverse class-frequency sample weights (0 = unweighted).
    pub balance: f64,
    /// Multiplier applied to the fitted logits.
    pub temperature: f64,
    /// Added to the empty logit after scaling.
    pub empty_bias: f64,
}

impl FitOptions {
    /// Settings used for the shipped decoder heads.
    pub fn head() -> Self {
        FitOptions { lambda: 1e-3, balance: 0.5, temperature: 8.0, empty_bias: -3.0 }
    }

    /// Settings used for the shipped fine classifiers.
    pub fn fine() -> Self {
        FitOptions { lambda: 1e-3, balance: 0.5, temperature: 8.0, empty_bias: 1.0 }
    }
}

fn class_weights(counts: &[u64; NUM_LABELS], balance: f64) -> [f64; NUM_LABELS] {
    let total: u64 = counts.iter().sum();
    std::array::from_fn(|k| {
        if counts[k] == 0 || balance == 0.0 {
            1.0
        } else {
            (total as f64 / counts[k] as f64).powf(balance)
        }
    })
}

fn finish(map: LinearMap, opts: &FitOptions) -> LinearMap {
    let t = opts.temperature;
    let mut m = map;
    for row in &mut m.weights {
        row.iter_mut().for_each(|w| *w *= t);
    }
    m.bias.iter_mut().for_each(|b| *b *= t);
    m.bias[Label::EMPTY.index()] += opts.empty_bias;
    m
}

/// Fraction of each label inside every stride block of the fine ground truth.
pub fn block_fractions(gt: &DenseLabelGrid, stride: usize) -> FeatureVolume {
    let dims = gt.spec().downsampled(stride).dims;
    let mut out = FeatureVolume::zeros(dims, NUM_LABELS);
    let [d, h, w] = gt.spec().dims;
    let inv = 1.0 / (stride * stride * stride) as f64;
    for z in 0..d {
        for y in 0..h {
            for x in 0..w {
                let l = gt.get([z, y, x]);
                out.voxel_mut([z / stride, y / stride, x / stride])[l.index()] += inv;
            }
        }
    }
    out
}

/// One training frame: sensor data and ground truth on the evaluation grid.
pub struct FitSample<'a> {
    pub frame: &'a FrameSensorData,
    pub gt: &'a DenseLabelGrid,
}

/// Fits the decoder head on stride-block label fractions.
pub fn fit_head(samples: &[FitSample], modality: Modality, spec: &GridSpec, cfg: &EncoderConfig, opts: &FitOptions) -> Result<HeadConfig> {
    let mut data = Vec::new();
    for s in samples {
        let features = encode_frame(s.frame, modality, spec, cfg)?;
        let targets = block_fractions(s.gt, cfg.stride);
        data.push((features, targets));
    }
    let mut counts = [0u64; NUM_LABELS];
    for s in samples {
        for l in s.gt.labels() {
            counts[l.index()] += 1;
        }
    }
    let weights = class_weights(&counts, opts.balance);
    let channels = cfg.channels * crate::net::DECODER_SCALES;
    let acc = data
        .iter()
        .map(|(features, targets)| {
            let ms = MultiScale::new(features);
            let [d, h, w] = features.dims();
            (0..d)
                .into_par_iter()
                .map(|z| {
                    let mut acc = RidgeAccumulator::new(channels, NUM_LABELS);
                    let mut buf = vec![0.0; channels];
                    for y in 0..h {
                        for x in 0..w {
                            ms.features_at([z, y, x], &mut buf);
                            let t = targets.voxel([z, y, x]);
                            let wgt: f64 = t.iter().zip(&weights).map(|(a, b)| a * b).sum();
                            acc.add(&buf, t, wgt);
                        }
                    }
                    acc
                })
                .reduce(|| RidgeAccumulator::new(channels, NUM_LABELS), |a, b| a.merge(&b))
        })
        .fold(RidgeAccumulator::new(channels, NUM_LABELS), |a, b| a.merge(&b));
    let map = finish(acc.solve(opts.lambda)?, opts);
    Ok(HeadConfig { channels, weights: map.weights, bias: map.bias, provenance: None })
}

/// Fits the fine classifier on the queries of a coarse prediction; the
/// semantic and geometric maps carry the fitted rows and the output map is the identity.
pub fn fit_fine(
    samples: &[FitSample],
    modality: Modality,
    spec: &GridSpec,
    cfg: &EncoderConfig,
    head: &HeadConfig,
    eta: usize,
    opts: &FitOptions,
) -> Result<FineFusionConfig> {
    let sem_in = crate::net::CAMERA_RAW_CHANNELS;
    let geo_in = cfg.channels;
    let dim = sem_in + geo_in;
    let empty = || vec![RidgeAccumulator::new(dim, NUM_LABELS); NUM_LABELS];
    let merge = |a: Vec<RidgeAccumulator>, b: Vec<RidgeAccumulator>| a.into_iter().zip(&b).map(|(x, y)| x.merge(y)).collect::<Vec<_>>();
    let mut per_class = empty();
    for s in samples {
        let coarse = crate::net::baseline_forward(s.frame, modality, spec, cfg, head)?;
        let (fs, fg, queries) = query_features(&coarse, s.frame, sem_in, eta)?;
        if queries.fine_spec().dims != s.gt.spec().dims {
            return Err(Error::ShapeMismatch("fine grid must match the ground-truth grid".into()));
        }
        let part = (0..queries.len())
            .into_par_iter()
            .with_min_len(1 << 15)
            .fold(empty, |mut acc, q| {
                let mut x = fs.row(q).to_vec();
                x.extend_from_slice(fg.row(q));
                let l = s.gt.labels()[queries.fine_index[q]].index();
                let mut y = [0.0; NUM_LABELS];
                y[l] = 1.0;
                acc[l].add(&x, &y, 1.0);
                acc
            })
            .reduce(empty, merge);
        per_class = merge(per_class, part);
    }
    let mut counts = [0u64; NUM_LABELS];
    for (c, acc) in counts.iter_mut().zip(&per_class) {
        *c = acc.samples() as u64;
    }
    let weights = class_weights(&counts, opts.balance);
    let acc = per_class
        .iter()
        .zip(weights)
        .fold(RidgeAccumulator::new(dim, NUM_LABELS), |a, (b, w)| a.merge_scaled(b, w));
    let map = finish(acc.solve(opts.lambda)?, opts);
    let split = |lo: usize, hi: usize| -> Vec<Vec<f64>> { map.weights.iter().map(|r| r[lo..hi].to_vec()).collect() };
    let mut identity = LinearMap::zeros(NUM_LABELS, NUM_LABELS);
    for (i, row) in identity.weights.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    identity.bias = map.bias.clone();
    let cfg = FineFusionConfig {
        semantic: LinearMap { input: sem_in, output: NUM_LABELS, weights: split(0, sem_in), bias: vec![0.0; NUM_LABELS] },
        geometric: LinearMap { input: geo_in, output: NUM_LABELS, weights: split(sem_in, dim), bias: vec![0.0; NUM_LABELS] },
        output: identity,
        provenance: None,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Coarse probabilities trilinearly resampled to the fine grid.
pub fn upsampled_baseline(probs: &FeatureVolume, spec: &GridSpec) -> Result<FeatureVolume> {
    resample_probabilities(probs, spec.dims)
}
