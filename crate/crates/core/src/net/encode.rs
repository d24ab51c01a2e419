//! LiDAR and camera voxel encoders.

use std::collections::BTreeMap;

use super::{EncoderConfig, FUSED_CHANNELS};
use crate::geometry::{self, CameraModel};
use crate::grid::GridSpec;
use crate::labels::Label;
use crate::synth::{DepthImage, PointCloud, SemanticImage};
use crate::volume::{box_kernel, FeatureVolume, ImageFeatureMap};
use crate::{Error, Result};

/// `[log1p(count), mean height offset, 17-bin label histogram]`.
pub const LIDAR_RAW_CHANNELS: usize = 19;
/// `[17-way one-hot label, inverse depth]`.
pub const CAMERA_RAW_CHANNELS: usize = 18;
const HIST_BINS: usize = 17;

/// Per-fine-voxel LiDAR features, sorted by linear voxel index.
pub fn lidar_raw_voxels(points: &PointCloud, spec: &GridSpec) -> Vec<(usize, [f64; LIDAR_RAW_CHANNELS])> {
    let mut keyed: Vec<(usize, f64, u8)> = points
        .points
        .iter()
        .filter(|p| (p.label.id() as usize) < HIST_BINS)
        .filter_map(|p| {
            let c = spec.world_to_voxel(p.position).ok()?;
            let idx = spec.voxel_of(p.position)?;
            // Height offset from the voxel center, in voxel units.
            let dz = c[0] - (idx[0] as f64 + 0.5);
            Some((spec.linear_index(idx), dz, p.label.id()))
        })
        .collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0).then(a.2.cmp(&b.2)).then(a.1.total_cmp(&b.1)));
    let mut out = Vec::new();
    let mut i = 0;
    while i < keyed.len() {
        let voxel = keyed[i].0;
        let mut raw = [0.0; LIDAR_RAW_CHANNELS];
        let mut n = 0usize;
        let mut dz = 0.0;
        while i < keyed.len() && keyed[i].0 == voxel {
            dz += keyed[i].1;
            raw[2 + keyed[i].2 as usize] += 1.0;
            n += 1;
            i += 1;
        }
        raw[0] = (n as f64).ln_1p();
        raw[1] = dz / n as f64;
        raw[2..].iter_mut().for_each(|v| *v /= n as f64);
        out.push((voxel, raw));
    }
    out
}

/// Raw feature of one camera pixel; all-zero when nothing was hit.
pub fn camera_raw_pixel(label: Label, depth: f64) -> [f64; CAMERA_RAW_CHANNELS] {
    let mut raw = [0.0; CAMERA_RAW_CHANNELS];
    if depth > 0.0 && (label.id() as usize) < HIST_BINS {
        raw[label.index()] = 1.0;
        raw[HIST_BINS] = 1.0 / depth.max(1.0);
    }
    raw
}

/// Per-view raw pixel features, used as the 2D feature maps of the refinement stage.
pub fn image_feature_maps(semantic: &[SemanticImage], depth: &[DepthImage]) -> Result<Vec<ImageFeatureMap>> {
    if semantic.len() != depth.len() {
        return Err(Error::ShapeMismatch("semantic and depth view counts differ".into()));
    }
    semantic
        .iter()
        .zip(depth)
        .map(|(s, d)| {
            if s.width != d.width || s.height != d.height {
                return Err(Error::ShapeMismatch("semantic and depth image sizes differ".into()));
            }
            let data = s.labels.iter().zip(&d.depth).flat_map(|(&l, &z)| camera_raw_pixel(l, z)).collect();
            ImageFeatureMap::from_data(s.height, s.width, CAMERA_RAW_CHANNELS, data)
        })
        .collect()
}

/// The fixed 1×1×1 map from LiDAR raw channels to the fused channels: one
/// channel per semantic class carrying that class's histogram mass.
pub fn lidar_projection() -> Vec<Vec<f64>> {
    (0..FUSED_CHANNELS)
        .map(|c| {
            let mut row = vec![0.0; LIDAR_RAW_CHANNELS];
            row[3 + c] = 1.0;
            row
        })
        .collect()
}

/// The camera counterpart of [`lidar_projection`].
pub fn camera_projection() -> Vec<Vec<f64>> {
    (0..FUSED_CHANNELS)
        .map(|c| {
            let mut row = vec![0.0; CAMERA_RAW_CHANNELS];
            row[1 + c] = 1.0;
            row
        })
        .collect()
}

fn project_and_smooth<const N: usize>(
    coarse: &GridSpec,
    cells: BTreeMap<usize, [f64; N]>,
    projection: &[Vec<f64>],
) -> FeatureVolume {
    let mut vol = FeatureVolume::zeros(coarse.dims, projection.len());
    for (idx, raw) in cells {
        for (o, row) in vol.voxel_at_mut(idx).iter_mut().zip(projection) {
            *o = row.iter().zip(&raw).map(|(w, x)| w * x).sum();
        }
    }
    vol.convolve3(&box_kernel())
}

/// `F^L` at stride `S`.
pub fn lidar_encode(points: &PointCloud, spec: &GridSpec, cfg: &EncoderConfig) -> Result<FeatureVolume> {
    cfg.validate_for(spec)?;
    let coarse = cfg.coarse_spec(spec);
    let s = cfg.stride;
    let block = (s * s * s) as f64;
    let mut cells: BTreeMap<usize, [f64; LIDAR_RAW_CHANNELS]> = BTreeMap::new();
    for (fine, raw) in lidar_raw_voxels(points, spec) {
        let [z, y, x] = spec.unravel(fine);
        let acc = cells.entry(coarse.linear_index([z / s, y / s, x / s])).or_insert([0.0; LIDAR_RAW_CHANNELS]);
        for (a, r) in acc.iter_mut().zip(raw) {
            *a += r / block;
        }
    }
    Ok(project_and_smooth(&coarse, cells, &lidar_projection()))
}

/// `F^C` at stride `S`: pixels are lifted with their depth and averaged per voxel.
pub fn camera_encode(
    semantic: &[SemanticImage],
    depth: &[DepthImage],
    cams: &[CameraModel],
    spec: &GridSpec,
    cfg: &EncoderConfig,
) -> Result<FeatureVolume> {
    cfg.validate_for(spec)?;
    if semantic.len() != cams.len() || depth.len() != cams.len() {
        return Err(Error::ShapeMismatch("one semantic and one depth image per camera required".into()));
    }
    let coarse = cfg.coarse_spec(spec);
    let s = cfg.stride as f64;
    let mut sums: BTreeMap<usize, ([f64; CAMERA_RAW_CHANNELS], usize)> = BTreeMap::new();
    for ((sem, dep), cam) in semantic.iter().zip(depth).zip(cams) {
        cam.validate()?;
        let ego_from_cam = cam.cam_from_world.inverse();
        for v in 0..dep.height {
            for u in 0..dep.width {
                let d = dep.get(u, v);
                if !(d > 0.0) {
                    continue;
                }
                let p = ego_from_cam.apply(geometry::scale(cam.ray_in_camera(u as f64, v as f64), d));
                let c = spec.world_to_voxel(p)?;
                let idx = c.map(|v| (v / s).floor() as i64);
                if !coarse.contains_index(idx) {
                    continue;
                }
                let entry = sums
                    .entry(coarse.linear_index(idx.map(|v| v as usize)))
                    .or_insert(([0.0; CAMERA_RAW_CHANNELS], 0));
                for (a, r) in entry.0.iter_mut().zip(camera_raw_pixel(sem.get(u, v), d)) {
                    *a += r;
                }
                entry.1 += 1;
            }
        }
    }
    let cells = sums.into_iter().map(|(k, (sum, n))| (k, sum.map(|v| v / n as f64))).collect();
    Ok(project_and_smooth(&coarse, cells, &camera_projection()))
}
