//! Cascade refinement: occupied coarse voxels are split into fine queries,
//! which sample image and voxel features, get classified, and are scattered
//! back into a fine grid where everything unqueried is empty.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::CameraModel;
use crate::grid::{DenseLabelGrid, GridSpec};
use crate::labels::{Label, NUM_LABELS};
use crate::net::{self, BaselineOutput, EncoderConfig, HeadConfig, LinearMap, Modality, CAMERA_RAW_CHANNELS};
use crate::synth::FrameSensorData;
use crate::volume::{argmax, softmax_in_place, FeatureVolume, ImageFeatureMap};
use crate::{Error, Result};

/// Fine queries with their parents and the fine-voxel ↔ query map.
#[derive(Clone, Debug, PartialEq)]
pub struct QuerySet {
    pub eta: usize,
    pub coarse_spec: GridSpec,
    /// Continuous coarse-grid coordinates `(z, y, x)`; voxel `k` spans `[k, k + 1)`.
    pub queries: Vec<[f64; 3]>,
    pub parents: Vec<[usize; 3]>,
    /// Linear fine-voxel index of each query.
    pub fine_index: Vec<usize>,
    /// `(fine index, query position)` sorted by fine index.
    lookup: Vec<(usize, usize)>,
}

impl QuerySet {
    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn fine_spec(&self) -> GridSpec {
        self.coarse_spec.refined(self.eta)
    }

    /// World point of query `q`: the center of its fine voxel.
    pub fn world(&self, q: usize) -> [f64; 3] {
        self.coarse_spec.center_unchecked(self.sample_coord(q))
    }

    /// Query `q` in the center convention of the coarse feature volume.
    pub fn sample_coord(&self, q: usize) -> [f64; 3] {
        let half = 0.5 / self.eta as f64;
        self.queries[q].map(|c| c + half - 0.5)
    }

    /// The query addressing a fine voxel, if any.
    pub fn query_for(&self, fine: usize) -> Option<usize> {
        self.lookup.binary_search_by_key(&fine, |e| e.0).ok().map(|i| self.lookup[i].1)
    }
}

/// Per-query feature rows.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryFeatures {
    pub channels: usize,
    pub data: Vec<f64>,
}

impl QueryFeatures {
    pub fn zeros(len: usize, channels: usize) -> Self {
        QueryFeatures { channels, data: vec![0.0; len * channels] }
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.channels).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, q: usize) -> &[f64] {
        &self.data[q * self.channels..(q + 1) * self.channels]
    }
}

/// Coarse voxels whose argmax is not empty, in `(z, y, x)` order.
pub fn extract_occupied(probs: &FeatureVolume) -> Vec<[usize; 3]> {
    let [_, h, w] = probs.dims();
    (0..probs.num_voxels())
        .filter(|&i| argmax(probs.voxel_at(i)) != Label::EMPTY.index())
        .map(|i| [i / (h * w), (i / w) % h, i % w])
        .collect()
}

/// Emits `eta³` children per occupied voxel at offsets `{0, 1/eta, …}` per axis.
pub fn split_voxels(occupied: &[[usize; 3]], eta: usize, coarse_spec: &GridSpec) -> Result<QuerySet> {
    if eta == 0 {
        return Err(Error::InvalidConfig("eta must be >= 1".into()));
    }
    let fine = coarse_spec.refined(eta);
    let n = occupied.len() * eta * eta * eta;
    let mut queries = Vec::with_capacity(n);
    let mut parents = Vec::with_capacity(n);
    let mut fine_index = Vec::with_capacity(n);
    let e = eta as f64;
    for &p in occupied {
        let signed = p.map(|v| v as i64);
        if !coarse_spec.contains_index(signed) {
            return Err(coarse_spec.out_of_bounds(signed));
        }
        for k in 0..eta {
            for j in 0..eta {
                for i in 0..eta {
                    queries.push([p[0] as f64 + k as f64 / e, p[1] as f64 + j as f64 / e, p[2] as f64 + i as f64 / e]);
                    parents.push(p);
                    fine_index.push(fine.linear_index([p[0] * eta + k, p[1] * eta + j, p[2] * eta + i]));
                }
            }
        }
    }
    let mut lookup: Vec<(usize, usize)> = fine_index.iter().copied().zip(0..).collect();
    lookup.sort_unstable();
    if let Some(w) = lookup.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::DuplicateQuery(w[0].0));
    }
    Ok(QuerySet { eta, coarse_spec: *coarse_spec, queries, parents, fine_index, lookup })
}

/// Mean over valid views of the bilinearly sampled image features.
pub fn sample_semantic(queries: &QuerySet, maps: &[ImageFeatureMap], cams: &[CameraModel]) -> Result<QueryFeatures> {
    if maps.len() != cams.len() {
        return Err(Error::ShapeMismatch("one feature map per camera required".into()));
    }
    let channels = maps.first().map_or(CAMERA_RAW_CHANNELS, |m| m.channels());
    for (m, c) in maps.iter().zip(cams) {
        if m.channels() != channels || m.width() != c.width() || m.height() != c.height() {
            return Err(Error::ShapeMismatch("feature map does not match its camera".into()));
        }
    }
    let mut out = QueryFeatures::zeros(queries.len(), channels);
    if channels == 0 {
        return Ok(out);
    }
    out.data.par_chunks_mut(channels).enumerate().for_each(|(q, row)| {
        let p = queries.world(q);
        let mut tmp = vec![0.0; channels];
        let mut valid = 0usize;
        for (map, cam) in maps.iter().zip(cams) {
            let proj = cam.project(p);
            if !proj.valid {
                continue;
            }
            map.sample_into([proj.u, proj.v], &mut tmp);
            for (o, v) in row.iter_mut().zip(&tmp) {
                *o += v;
            }
            valid += 1;
        }
        if valid > 1 {
            row.iter_mut().for_each(|v| *v /= valid as f64);
        }
    });
    Ok(out)
}

/// Trilinear samples of the coarse feature volume at the query points.
pub fn sample_geometric(queries: &QuerySet, fused: &FeatureVolume) -> Result<QueryFeatures> {
    if fused.dims() != queries.coarse_spec.dims {
        return Err(Error::ShapeMismatch(format!(
            "feature volume {:?} does not match coarse grid {:?}",
            fused.dims(),
            queries.coarse_spec.dims
        )));
    }
    let c = fused.channels();
    let mut out = QueryFeatures::zeros(queries.len(), c);
    if c > 0 {
        out.data.par_chunks_mut(c).enumerate().for_each(|(q, row)| fused.sample_into(queries.sample_coord(q), row));
    }
    Ok(out)
}

/// The three maps `G_f` of the fine classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FineFusionConfig {
    pub semantic: LinearMap,
    pub geometric: LinearMap,
    pub output: LinearMap,
    #[serde(skip)]
    pub provenance: Option<String>,
}

macro_rules! shipped_fine {
    ($name:literal) => {
        ($name, include_str!(concat!("../assets/", $name)))
    };
}

impl FineFusionConfig {
    pub fn validate(&self) -> Result<()> {
        self.semantic.validate()?;
        self.geometric.validate()?;
        self.output.validate()?;
        if self.semantic.output != self.output.input || self.geometric.output != self.output.input {
            return Err(Error::ShapeMismatch("branch maps must share the hidden width".into()));
        }
        if self.output.output != NUM_LABELS {
            return Err(Error::ShapeMismatch("output map must produce 18 logits".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: FineFusionConfig = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let mut cfg = FineFusionConfig::from_json(&text)?;
        cfg.provenance = Some(path.display().to_string());
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fine config serializes")
    }

    pub fn shipped(modality: Modality, stride: usize) -> Result<Self> {
        let (name, text) = match (modality, stride) {
            (Modality::Camera, 2) => shipped_fine!("fine_camera_s2.json"),
            (Modality::Camera, 4) => shipped_fine!("fine_camera_s4.json"),
            (Modality::Lidar, 2) => shipped_fine!("fine_lidar_s2.json"),
            (Modality::Lidar, 4) => shipped_fine!("fine_lidar_s4.json"),
            (Modality::Multimodal, 2) => shipped_fine!("fine_multimodal_s2.json"),
            (Modality::Multimodal, 4) => shipped_fine!("fine_multimodal_s4.json"),
            _ => return Err(Error::InvalidConfig(format!("no shipped fine config for stride {stride}"))),
        };
        let mut cfg = FineFusionConfig::from_json(text)?;
        cfg.provenance = Some(format!("assets/{name}"));
        Ok(cfg)
    }

    /// Logits of one query: `out(sem(F^S) + geo(F^G))`.
    pub fn logits_into(&self, fs: &[f64], fg: &[f64], hidden: &mut [f64], tmp: &mut [f64], out: &mut [f64]) {
        self.semantic.apply_into(fs, hidden);
        self.geometric.apply_into(fg, tmp);
        for (h, t) in hidden.iter_mut().zip(tmp.iter()) {
            *h += t;
        }
        self.output.apply_into(hidden, out);
    }
}

/// Per-query 18-way distributions.
pub fn fuse_fine(fs: &QueryFeatures, fg: &QueryFeatures, cfg: &FineFusionConfig) -> Result<QueryFeatures> {
    cfg.validate()?;
    if fs.channels != cfg.semantic.input || fg.channels != cfg.geometric.input {
        return Err(Error::ShapeMismatch(format!(
            "fine maps expect {}+{} channels, got {}+{}",
            cfg.semantic.input, cfg.geometric.input, fs.channels, fg.channels
        )));
    }
    if fs.len() != fg.len() {
        return Err(Error::ShapeMismatch("branch feature counts differ".into()));
    }
    let hidden_width = cfg.output.input;
    let mut out = QueryFeatures::zeros(fs.len(), NUM_LABELS);
    out.data.par_chunks_mut(NUM_LABELS).enumerate().for_each(|(q, p)| {
        let mut hidden = vec![0.0; hidden_width];
        let mut tmp = vec![0.0; hidden_width];
        cfg.logits_into(fs.row(q), fg.row(q), &mut hidden, &mut tmp, p);
        softmax_in_place(p);
    });
    Ok(out)
}

/// Fine prediction: labels on the fine grid plus the distributions of queried voxels.
#[derive(Clone, Debug, PartialEq)]
pub struct FineOutput {
    pub labels: DenseLabelGrid,
    pub query_probs: QueryFeatures,
    pub queries: QuerySet,
}

impl FineOutput {
    /// Distribution of any fine voxel; unqueried voxels are one-hot empty.
    pub fn probability_at(&self, idx: [usize; 3]) -> [f64; NUM_LABELS] {
        let mut p = [0.0; NUM_LABELS];
        match self.queries.query_for(self.labels.spec().linear_index(idx)) {
            Some(q) => p.copy_from_slice(self.query_probs.row(q)),
            None => p[Label::EMPTY.index()] = 1.0,
        }
        p
    }

    /// Dense fine probability volume (memory heavy on large grids).
    pub fn to_probability_volume(&self) -> FeatureVolume {
        let spec = self.labels.spec();
        let mut onehot = [0.0; NUM_LABELS];
        onehot[Label::EMPTY.index()] = 1.0;
        let mut vol = FeatureVolume::constant(spec.dims, &onehot);
        for (q, &fine) in self.queries.fine_index.iter().enumerate() {
            vol.voxel_at_mut(fine).copy_from_slice(self.query_probs.row(q));
        }
        vol
    }
}

/// Writes each query's distribution and argmax into its fine voxel.
pub fn scatter_volume(probs: QueryFeatures, queries: QuerySet) -> Result<FineOutput> {
    if probs.channels != NUM_LABELS || probs.len() != queries.len() {
        return Err(Error::ShapeMismatch("one 18-way distribution per query required".into()));
    }
    let mut labels = DenseLabelGrid::empty(queries.fine_spec());
    let cells = labels.labels_mut();
    for (q, &fine) in queries.fine_index.iter().enumerate() {
        cells[fine] = Label::from_channel(argmax(probs.row(q)));
    }
    Ok(FineOutput { labels, query_probs: probs, queries })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RefineOutput {
    pub coarse: BaselineOutput,
    pub fine: FineOutput,
}

/// Baseline forward followed by one refinement stage with split ratio `eta`.
#[allow(clippy::too_many_arguments)]
pub fn refine(
    frame: &FrameSensorData,
    modality: Modality,
    spec: &GridSpec,
    cfg: &EncoderConfig,
    head: &HeadConfig,
    fine_cfg: &FineFusionConfig,
    eta: usize,
) -> Result<RefineOutput> {
    let coarse = net::baseline_forward(frame, modality, spec, cfg, head)?;
    let fine = refine_from(&coarse, frame, fine_cfg, eta)?;
    Ok(RefineOutput { coarse, fine })
}

/// Refinement stage on top of an existing coarse prediction.
pub fn refine_from(coarse: &BaselineOutput, frame: &FrameSensorData, fine_cfg: &FineFusionConfig, eta: usize) -> Result<FineOutput> {
    let (fs, fg, queries) = query_features(coarse, frame, fine_cfg.semantic.input, eta)?;
    let probs = fuse_fine(&fs, &fg, fine_cfg)?;
    scatter_volume(probs, queries)
}

/// Both feature branches of every query; the LiDAR-only variant gets zero semantics.
pub fn query_features(
    coarse: &BaselineOutput,
    frame: &FrameSensorData,
    semantic_channels: usize,
    eta: usize,
) -> Result<(QueryFeatures, QueryFeatures, QuerySet)> {
    let occupied = extract_occupied(&coarse.probs);
    let queries = split_voxels(&occupied, eta, &coarse.coarse_spec)?;
    let fs = if coarse.modality.uses_camera() {
        if !frame.has_depth() {
            return Err(Error::MissingDepth(coarse.modality.name()));
        }
        let maps = net::image_feature_maps(&frame.semantic_images, &frame.depth_images)?;
        sample_semantic(&queries, &maps, &frame.cameras)?
    } else {
        QueryFeatures::zeros(queries.len(), semantic_channels)
    };
    let fg = sample_geometric(&queries, &coarse.features)?;
    Ok((fs, fg, queries))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coarse() -> GridSpec {
        GridSpec::new([0.0; 3], 1.0, [6, 8, 8]).unwrap()
    }

    #[test]
    fn split_eta_two() {
        let qs = split_voxels(&[[3, 4, 5]], 2, &coarse()).unwrap();
        assert_eq!(qs.len(), 8);
        let mut got = qs.queries.clone();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut want = vec![];
        for z in [3.0, 3.5] {
            for y in [4.0, 4.5] {
                for x in [5.0, 5.5] {
                    want.push([z, y, x]);
                }
            }
        }
        assert_eq!(got, want);
        assert!(qs.parents.iter().all(|&p| p == [3, 4, 5]));
    }

    #[test]
    fn split_eta_one_is_identity() {
        let occ = [[0, 0, 0], [2, 3, 4]];
        let qs = split_voxels(&occ, 1, &coarse()).unwrap();
        assert_eq!(qs.queries, vec![[0.0, 0.0, 0.0], [2.0, 3.0, 4.0]]);
        // eta = 1 samples exactly at the coarse nodes
        assert_eq!(qs.sample_coord(1), [2.0, 3.0, 4.0]);
    }

    #[test]
    fn query_count() {
        let occ: Vec<_> = (0..5).map(|i| [i, 0, 0]).collect();
        assert_eq!(split_voxels(&occ, 4, &coarse()).unwrap().len(), 320);
    }

    #[test]
    fn world_points_are_fine_centers() {
        let qs = split_voxels(&[[0, 0, 0]], 2, &coarse()).unwrap();
        assert_eq!(qs.world(0), [0.25, 0.25, 0.25]);
        assert_eq!(qs.world(7), [0.75, 0.75, 0.75]);
    }

    #[test]
    fn scatter_block() {
        let qs = split_voxels(&[[1, 1, 1]], 2, &coarse()).unwrap();
        let mut probs = QueryFeatures::zeros(8, NUM_LABELS);
        for q in 0..8 {
            probs.data[q * NUM_LABELS + Label::CAR.index()] = 1.0;
        }
        let out = scatter_volume(probs, qs.clone()).unwrap();
        assert_eq!(out.labels.spec().dims, [12, 16, 16]);
        assert_eq!(out.labels.occupied_count(), 8);
        for z in 2..4 {
            for y in 2..4 {
                for x in 2..4 {
                    assert_eq!(out.labels.get([z, y, x]), Label::CAR);
                }
            }
        }
        assert_eq!(out.probability_at([0, 0, 0])[Label::EMPTY.index()], 1.0);
    }
}
