//! Ray-cast LiDAR, the six-camera surround rig and ground-truth rasterization.
//!
//! All sensor outputs are expressed in the ego frame of their frame; that is
//! also the frame of the occupancy grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::primitives::Solid;
use super::scene::{LidarConfig, Scene};
use crate::geometry::{self, CameraModel, Pose, Vec3};
use crate::grid::{DenseLabelGrid, GridSpec};
use crate::labels::Label;
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LidarPoint {
    pub position: Vec3,
    pub label: Label,
    pub instance: Option<u32>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<LidarPoint>,
}

impl PointCloud {
    pub fn new(points: Vec<LidarPoint>) -> Self {
        PointCloud { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Per-pixel label ids; row-major, `v * width + u`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemanticImage {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<Label>,
}

impl SemanticImage {
    pub fn get(&self, u: usize, v: usize) -> Label {
        self.labels[v * self.width + u]
    }
}

/// Per-pixel depth along the optical axis in meters; 0 where nothing was hit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    pub depth: Vec<f64>,
}

impl DepthImage {
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.depth[v * self.width + u]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameSensorData {
    pub frame_index: usize,
    pub point_cloud: PointCloud,
    pub cameras: Vec<CameraModel>,
    pub semantic_images: Vec<SemanticImage>,
    pub depth_images: Vec<DepthImage>,
}

impl FrameSensorData {
    pub fn has_depth(&self) -> bool {
        !self.depth_images.is_empty() && self.depth_images.len() == self.cameras.len()
    }
}

/// Labeled solids of `frame` expressed in that frame's ego coordinates.
#[derive(Clone, Debug)]
pub struct EgoSolids {
    world_from_ego: Pose,
    solids: Vec<(Solid, Label, Option<u32>)>,
}

impl EgoSolids {
    pub fn new(scene: &Scene, frame: usize) -> Result<Self> {
        Ok(EgoSolids { world_from_ego: *scene.ego_pose(frame)?, solids: scene.solids_at(frame) })
    }

    /// Nearest hit along the ego-frame ray; ties keep the earlier solid.
    pub fn cast(&self, origin: Vec3, dir: Vec3) -> Option<(f64, Label, Option<u32>)> {
        let o = self.world_from_ego.apply(origin);
        let d = self.world_from_ego.rotate(dir);
        let mut best: Option<(f64, Label, Option<u32>)> = None;
        for (solid, label, inst) in &self.solids {
            if let Some(t) = solid.intersect(o, d) {
                if best.is_none_or(|b| t < b.0) {
                    best = Some((t, *label, *inst));
                }
            }
        }
        best
    }

    /// Label at an ego-frame point; later solids overwrite earlier ones.
    pub fn label_at(&self, p: Vec3) -> Label {
        let w = self.world_from_ego.apply(p);
        let mut label = Label::EMPTY;
        for (solid, l, _) in &self.solids {
            if solid.contains(w) {
                label = *l;
            }
        }
        label
    }
}

/// Cast `channels × azimuth_steps` rays from the ego origin.
pub fn simulate_lidar(scene: &Scene, frame: usize, lidar: &LidarConfig) -> Result<PointCloud> {
    if lidar.channels == 0 || lidar.azimuth_steps == 0 {
        return Err(crate::Error::InvalidConfig("lidar needs at least one ring and one azimuth step".into()));
    }
    let solids = EgoSolids::new(scene, frame)?;
    let rings: Vec<Vec<LidarPoint>> = (0..lidar.channels)
        .into_par_iter()
        .map(|ring| {
            let (se, ce) = lidar.elevation(ring).sin_cos();
            let mut pts = Vec::new();
            for step in 0..lidar.azimuth_steps {
                let az = 2.0 * std::f64::consts::PI * step as f64 / lidar.azimuth_steps as f64;
                let (sa, ca) = az.sin_cos();
                let dir = [ce * ca, ce * sa, se];
                if let Some((t, label, instance)) = solids.cast([0.0; 3], dir) {
                    if t <= lidar.max_range {
                        pts.push(LidarPoint { position: geometry::scale(dir, t), label, instance });
                    }
                }
            }
            pts
        })
        .collect();
    Ok(PointCloud::new(rings.into_iter().flatten().collect()))
}

/// Six cameras at the configured mount, yawed in 60 degree steps.
pub fn camera_rig(scene: &Scene) -> Vec<CameraModel> {
    let c = &scene.config.camera;
    (0..6)
        .map(|k| {
            let yaw = (k as f64 * 60.0).to_radians();
            CameraModel::looking_along(yaw, c.mount, c.width, c.height, c.hfov_deg.to_radians())
        })
        .collect()
}

/// Semantic and depth image of one camera.
pub fn render_view(solids: &EgoSolids, cam: &CameraModel) -> (SemanticImage, DepthImage) {
    let (w, h) = (cam.width(), cam.height());
    let ego_from_cam = cam.cam_from_world.inverse();
    let origin = ego_from_cam.translation;
    let pixels: Vec<(Label, f64)> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (u, v) = ((i % w) as f64, (i / w) as f64);
            // Unit-depth camera ray: the hit parameter equals optical depth.
            let dir = ego_from_cam.rotate(cam.ray_in_camera(u, v));
            match solids.cast(origin, dir) {
                Some((t, label, _)) => (label, t),
                None => (Label::EMPTY, 0.0),
            }
        })
        .collect();
    let (labels, depth) = pixels.into_iter().unzip();
    (SemanticImage { width: w, height: h, labels }, DepthImage { width: w, height: h, depth })
}

pub fn render_views(scene: &Scene, frame: usize) -> Result<(Vec<SemanticImage>, Vec<DepthImage>)> {
    let solids = EgoSolids::new(scene, frame)?;
    Ok(camera_rig(scene).iter().map(|cam| render_view(&solids, cam)).unzip())
}

/// Sensor data of one frame using the scene's LiDAR configuration.
pub fn capture_frame(scene: &Scene, frame: usize) -> Result<FrameSensorData> {
    capture_frame_with(scene, frame, &scene.config.lidar)
}

pub fn capture_frame_with(scene: &Scene, frame: usize, lidar: &LidarConfig) -> Result<FrameSensorData> {
    let point_cloud = simulate_lidar(scene, frame, lidar)?;
    let (semantic_images, depth_images) = render_views(scene, frame)?;
    Ok(FrameSensorData { frame_index: frame, point_cloud, cameras: camera_rig(scene), semantic_images, depth_images })
}

/// Label of the solid containing each voxel center; later solids win.
pub fn ground_truth_occupancy(scene: &Scene, frame: usize, spec: &GridSpec) -> Result<DenseLabelGrid> {
    spec.validate()?;
    let world_from_ego = *scene.ego_pose(frame)?;
    let ego_from_world = world_from_ego.inverse();
    let mut grid = DenseLabelGrid::empty(*spec);
    for (solid, label, _) in scene.solids_at(frame) {
        let (lo, hi) = solid.aabb();
        // Ego-frame bounds of the world box.
        let mut elo = [f64::INFINITY; 3];
        let mut ehi = [f64::NEG_INFINITY; 3];
        for corner in 0..8 {
            let p = [
                if corner & 1 == 0 { lo[0] } else { hi[0] },
                if corner & 2 == 0 { lo[1] } else { hi[1] },
                if corner & 4 == 0 { lo[2] } else { hi[2] },
            ];
            let e = ego_from_world.apply(p);
            for k in 0..3 {
                elo[k] = elo[k].min(e[k]);
                ehi[k] = ehi[k].max(e[k]);
            }
        }
        let a = spec.world_to_voxel(elo)?;
        let b = spec.world_to_voxel(ehi)?;
        let range = |k: usize| -> Option<(usize, usize)> {
            let n = spec.dims[k] as f64;
            let start = (a[k] - 0.5).ceil().max(0.0);
            let end = (b[k] - 0.5).floor().min(n - 1.0);
            (start <= end).then_some((start as usize, end as usize))
        };
        let (Some(rz), Some(ry), Some(rx)) = (range(0), range(1), range(2)) else {
            continue;
        };
        for z in rz.0..=rz.1 {
            for y in ry.0..=ry.1 {
                for x in rx.0..=rx.1 {
                    let c = spec.center_unchecked([z as f64, y as f64, x as f64]);
                    if solid.contains(world_from_ego.apply(c)) {
                        grid.set([z, y, x], label);
                    }
                }
            }
        }
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundingBox;
    use crate::synth::scene::{SceneConfig, StaticPrimitive};

    fn bare_scene(statics: Vec<StaticPrimitive>) -> Scene {
        Scene {
            seed: 0,
            config: SceneConfig::default(),
            static_primitives: statics,
            tracks: vec![],
            frame_count: 1,
            ego_poses: vec![Pose::identity()],
        }
    }

    #[test]
    fn unit_cube_has_125_centers() {
        let cube = Solid::Box(BoundingBox { center: [0.0; 3], size: [1.0; 3], yaw: 0.0 });
        let scene = bare_scene(vec![StaticPrimitive { label: Label::CAR, solid: cube }]);
        // Voxel centers on the 0.2 m lattice through the origin.
        let spec = GridSpec::new([-1.1, -1.1, -1.1], 0.2, [11, 11, 11]).unwrap();
        let g = ground_truth_occupancy(&scene, 0, &spec).unwrap();
        assert_eq!(g.occupied_count(), 125);
    }

    #[test]
    fn empty_scene_renders_nothing() {
        let scene = bare_scene(vec![]);
        let (sem, depth) = render_views(&scene, 0).unwrap();
        assert!(sem.iter().all(|s| s.labels.iter().all(|l| l.is_empty())));
        assert!(depth.iter().all(|d| d.depth.iter().all(|&x| x == 0.0)));
        let g = ground_truth_occupancy(&scene, 0, &GridSpec::desk()).unwrap();
        assert_eq!(g.occupied_count(), 0);
    }
}
