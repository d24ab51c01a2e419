//! Procedural street scenes.
//!
//! A scene is a straight road along world +X flanked by sidewalks, terrain,
//! an optional other-flat patch, buildings, trees, barriers and cones, plus
//! moving objects. The ego vehicle drives along +X in the center lane.

use serde::{Deserialize, Serialize};

use super::primitives::Solid;
use super::rng::SplitMix64;
use crate::geometry::{BoundingBox, Pose};
use crate::labels::Label;
use crate::{Error, Result};

/// Height of the drivable surface in world coordinates; the sensors sit at z = 0.
pub const GROUND_TOP: f64 = -1.65;
const SIDEWALK_TOP: f64 = -1.45;
const TERRAIN_TOP: f64 = -1.62;
const SLAB_BOTTOM: f64 = -2.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LidarConfig {
    pub channels: usize,
    pub azimuth_steps: usize,
    pub min_elevation_deg: f64,
    pub max_elevation_deg: f64,
    pub max_range: f64,
}

impl Default for LidarConfig {
    fn default() -> Self {
        LidarConfig {
            channels: 32,
            azimuth_steps: 1024,
            min_elevation_deg: -30.0,
            max_elevation_deg: 10.0,
            max_range: 80.0,
        }
    }
}

impl LidarConfig {
    /// Elevation of ring `i` in radians; a single ring uses the minimum.
    pub fn elevation(&self, ring: usize) -> f64 {
        let t = if self.channels > 1 { ring as f64 / (self.channels - 1) as f64 } else { 0.0 };
        (self.min_elevation_deg + t * (self.max_elevation_deg - self.min_elevation_deg)).to_radians()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraRigConfig {
    pub width: usize,
    pub height: usize,
    pub hfov_deg: f64,
    /// Camera center in the ego frame; all six views share it.
    pub mount: [f64; 3],
}

impl Default for CameraRigConfig {
    fn default() -> Self {
        CameraRigConfig { width: 160, height: 96, hfov_deg: 70.0, mount: [0.0, 0.0, 0.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    /// Half-size of the square scene area in meters.
    pub extent: f64,
    pub object_count: usize,
    pub frame_count: usize,
    /// Ego displacement along +X per frame, meters.
    pub ego_speed: f64,
    pub camera: CameraRigConfig,
    pub lidar: LidarConfig,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            extent: 25.6,
            object_count: 8,
            frame_count: 5,
            ego_speed: 1.0,
            camera: CameraRigConfig::default(),
            lidar: LidarConfig::default(),
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.extent > 0.0) {
            return bad("extent must be > 0");
        }
        if self.extent > 51.2 {
            return bad("extent exceeds the standard grid");
        }
        if self.frame_count == 0 {
            return bad("frame_count must be >= 1");
        }
        if !self.ego_speed.is_finite() {
            return bad("ego_speed must be finite");
        }
        if self.lidar.channels == 0 || self.lidar.azimuth_steps == 0 {
            return bad("lidar needs at least one channel and one azimuth step");
        }
        if self.camera.width < 2 || self.camera.height < 2 {
            return bad("camera images must be at least 2x2");
        }
        if !(self.camera.hfov_deg > 0.0 && self.camera.hfov_deg < 180.0) {
            return bad("hfov_deg must be in (0, 180)");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StaticPrimitive {
    pub label: Label,
    pub solid: Solid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectTrack {
    pub instance_id: u32,
    pub class: Label,
    /// World-frame box per frame; `None` when the object is absent.
    pub boxes: Vec<Option<BoundingBox>>,
}

impl ObjectTrack {
    pub fn box_at(&self, frame: usize) -> Option<&BoundingBox> {
        self.boxes.get(frame).and_then(|b| b.as_ref())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub seed: u64,
    pub config: SceneConfig,
    pub static_primitives: Vec<StaticPrimitive>,
    pub tracks: Vec<ObjectTrack>,
    pub frame_count: usize,
    /// `world_from_ego` per frame.
    pub ego_poses: Vec<Pose>,
}

impl Scene {
    pub fn ego_pose(&self, frame: usize) -> Result<&Pose> {
        self.ego_poses.get(frame).ok_or(Error::FrameOutOfRange(frame))
    }

    pub fn track(&self, instance: u32) -> Option<&ObjectTrack> {
        self.tracks.iter().find(|t| t.instance_id == instance)
    }

    /// Every solid present at `frame` in world coordinates, with its label
    /// and instance id; static first, then objects.
    pub fn solids_at(&self, frame: usize) -> Vec<(Solid, Label, Option<u32>)> {
        let mut out: Vec<_> = self.static_primitives.iter().map(|p| (p.solid, p.label, None)).collect();
        for t in &self.tracks {
            if let Some(b) = t.box_at(frame) {
                out.push((Solid::Box(*b), t.class, Some(t.instance_id)));
            }
        }
        out
    }

    /// Canonical JSON: sorted keys, floats as `%.9g`.
    pub fn to_canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("scene serializes");
        super::json::canonical(&value)
    }
}

/// Object sizes `(length, width, height)` per movable class.
fn object_size(class: Label) -> [f64; 3] {
    match class {
        Label::CAR => [4.5, 1.9, 1.6],
        Label::BUS => [11.0, 2.9, 3.2],
        Label::TRUCK => [7.0, 2.5, 3.0],
        Label::TRAILER => [8.0, 2.5, 3.0],
        Label::CONST_VEH => [6.0, 2.8, 3.0],
        Label::MOTORCYCLE => [2.1, 0.8, 1.4],
        Label::BICYCLE => [1.7, 0.6, 1.3],
        Label::PEDESTRIAN => [0.7, 0.7, 1.75],
        _ => [1.0, 1.0, 1.0],
    }
}

fn slab(x: [f64; 2], y: [f64; 2], z: [f64; 2]) -> Solid {
    Solid::Box(BoundingBox {
        center: [0.5 * (x[0] + x[1]), 0.5 * (y[0] + y[1]), 0.5 * (z[0] + z[1])],
        size: [x[1] - x[0], y[1] - y[0], z[1] - z[0]],
        yaw: 0.0,
    })
}

fn overlaps_xy(a: &Solid, b: &Solid, margin: f64) -> bool {
    let (alo, ahi) = a.aabb();
    let (blo, bhi) = b.aabb();
    (0..2).all(|k| alo[k] - margin < bhi[k] && blo[k] - margin < ahi[k])
}

/// Deterministic scene for `(seed, config)`.
pub fn generate_scene(seed: u64, config: &SceneConfig) -> Result<Scene> {
    config.validate()?;
    let mut rng = SplitMix64::new(seed);
    let e = config.extent;
    let xs = [-e, e];

    let road_half = rng.uniform(5.0, 7.0).min(0.45 * e);
    let walk = rng.uniform(2.0, 3.5);
    let walk_outer = (road_half + walk).min(e);
    let flat_split = rng.uniform(-0.5 * e, 0.5 * e);

    let mut statics = vec![
        StaticPrimitive {
            label: Label::DRIVE_SURFACE,
            solid: slab(xs, [-road_half, road_half], [SLAB_BOTTOM, GROUND_TOP]),
        },
        StaticPrimitive {
            label: Label::SIDEWALK,
            solid: slab(xs, [road_half, walk_outer], [SLAB_BOTTOM, SIDEWALK_TOP]),
        },
        StaticPrimitive {
            label: Label::SIDEWALK,
            solid: slab(xs, [-walk_outer, -road_half], [SLAB_BOTTOM, SIDEWALK_TOP]),
        },
    ];
    if walk_outer < e {
        statics.push(StaticPrimitive {
            label: Label::TERRAIN,
            solid: slab(xs, [-e, -walk_outer], [SLAB_BOTTOM, TERRAIN_TOP]),
        });
        statics.push(StaticPrimitive {
            label: Label::TERRAIN,
            solid: slab([-e, flat_split], [walk_outer, e], [SLAB_BOTTOM, TERRAIN_TOP]),
        });
        statics.push(StaticPrimitive {
            label: Label::OTHER_FLAT,
            solid: slab([flat_split, e], [walk_outer, e], [SLAB_BOTTOM, TERRAIN_TOP]),
        });
    }

    // Roadside furniture: buildings and trees beyond the sidewalk.
    let mut furniture: Vec<StaticPrimitive> = Vec::new();
    let place = |prim: StaticPrimitive, furniture: &mut Vec<StaticPrimitive>| {
        if !furniture.iter().any(|f| overlaps_xy(&f.solid, &prim.solid, 0.3)) {
            furniture.push(prim);
        }
    };
    for side in [-1.0, 1.0] {
        let building_count = 2 + rng.below(3) as usize;
        for _ in 0..building_count {
            let length = rng.uniform(4.0, 12.0);
            let depth = rng.uniform(3.0, 8.0);
            let height = rng.uniform(4.0, 10.0);
            let setback = rng.uniform(2.0, 6.0);
            let cx = rng.uniform(-e + 0.5 * length, e - 0.5 * length);
            let cy = side * (walk_outer + setback + 0.5 * depth);
            let yaw = rng.uniform(-0.15, 0.15);
            if (cy.abs() + 0.5 * depth) > e {
                continue;
            }
            place(
                StaticPrimitive {
                    label: Label::MANMADE,
                    solid: Solid::Box(BoundingBox {
                        center: [cx, cy, TERRAIN_TOP + 0.5 * height],
                        size: [length, depth, height],
                        yaw,
                    }),
                },
                &mut furniture,
            );
        }
        let tree_count = 3 + rng.below(4) as usize;
        for _ in 0..tree_count {
            let radius = rng.uniform(0.4, 1.2);
            let height = rng.uniform(2.5, 6.0);
            let cx = rng.uniform(-e + radius, e - radius);
            let cy = side * rng.uniform(walk_outer + radius + 0.3, (walk_outer + 6.0).min(e - radius));
            place(
                StaticPrimitive {
                    label: Label::VEGETATION,
                    solid: Solid::Cylinder {
                        center: [cx, cy],
                        radius,
                        z_min: TERRAIN_TOP,
                        z_max: TERRAIN_TOP + height,
                    },
                },
                &mut furniture,
            );
        }
        let barrier_count = 1 + rng.below(3) as usize;
        for _ in 0..barrier_count {
            let cx = rng.uniform(-e + 1.5, e - 1.5);
            place(
                StaticPrimitive {
                    label: Label::BARRIER,
                    solid: Solid::Box(BoundingBox {
                        center: [cx, side * (road_half - 0.4), GROUND_TOP + 0.5],
                        size: [2.0, 0.4, 1.0],
                        yaw: 0.0,
                    }),
                },
                &mut furniture,
            );
        }
        let cone_count = 1 + rng.below(3) as usize;
        for _ in 0..cone_count {
            let cx = rng.uniform(-e + 0.5, e - 0.5);
            place(
                StaticPrimitive {
                    label: Label::TRAFFIC_CONE,
                    solid: Solid::Cylinder {
                        center: [cx, side * (road_half - 1.2)],
                        radius: 0.2,
                        z_min: GROUND_TOP,
                        z_max: GROUND_TOP + 0.7,
                    },
                },
                &mut furniture,
            );
        }
    }
    statics.extend(furniture);

    let ego_poses: Vec<Pose> = (0..config.frame_count)
        .map(|t| Pose::translation([t as f64 * config.ego_speed - 0.5 * (config.frame_count - 1) as f64 * config.ego_speed, 0.0, 0.0]))
        .collect();

    // Moving objects. Vehicles use the side lanes, pedestrians and bicycles
    // the sidewalks; every frame's box must stay clear of the ego lane,
    // earlier objects and static furniture.
    let classes: [(Label, u64); 8] = [
        (Label::CAR, 8),
        (Label::PEDESTRIAN, 4),
        (Label::TRUCK, 2),
        (Label::BUS, 1),
        (Label::TRAILER, 1),
        (Label::CONST_VEH, 1),
        (Label::MOTORCYCLE, 2),
        (Label::BICYCLE, 2),
    ];
    let total_weight: u64 = classes.iter().map(|c| c.1).sum();
    let mut tracks: Vec<ObjectTrack> = Vec::new();
    let mut next_id = 1u32;
    for _ in 0..config.object_count {
        for _attempt in 0..40 {
            let mut pick = rng.below(total_weight);
            let mut class = Label::CAR;
            for (c, w) in classes {
                if pick < w {
                    class = c;
                    break;
                }
                pick -= w;
            }
            let size = object_size(class);
            let on_walk = matches!(class, Label::PEDESTRIAN | Label::BICYCLE);
            let side = if rng.chance(0.5) { 1.0 } else { -1.0 };
            let (y, base, speed) = if on_walk {
                let y = side * rng.uniform(road_half + 0.6, walk_outer - 0.6).max(road_half + 0.4);
                (y, SIDEWALK_TOP, rng.uniform(0.0, 0.5))
            } else {
                let lane = 0.5 * (1.6 + road_half);
                (side * lane, GROUND_TOP, if rng.chance(0.3) { 0.0 } else { rng.uniform(0.5, 2.0) })
            };
            let heading = if side > 0.0 { std::f64::consts::PI } else { 0.0 };
            let x0 = rng.uniform(-e + 0.5 * size[0], e - 0.5 * size[0]);
            let boxes: Vec<Option<BoundingBox>> = (0..config.frame_count)
                .map(|t| {
                    let x = x0 + heading.cos() * speed * t as f64;
                    Some(BoundingBox { center: [x, y, base + 0.5 * size[2]], size, yaw: heading })
                })
                .collect();
            let inside = boxes.iter().flatten().all(|b| {
                let (lo, hi) = b.aabb();
                lo[0] >= -e && hi[0] <= e && lo[1] >= -e && hi[1] <= e && (lo[1] > 1.2 || hi[1] < -1.2)
            });
            let clear = boxes.iter().enumerate().all(|(t, b)| {
                let s = Solid::Box(b.unwrap());
                tracks.iter().all(|o| !overlaps_xy(&Solid::Box(o.boxes[t].unwrap()), &s, 0.5))
                    && statics
                        .iter()
                        .filter(|p| !matches!(p.label, Label::DRIVE_SURFACE | Label::SIDEWALK | Label::TERRAIN | Label::OTHER_FLAT))
                        .all(|p| !overlaps_xy(&p.solid, &s, 0.3))
            });
            if inside && clear {
                tracks.push(ObjectTrack { instance_id: next_id, class, boxes });
                next_id += 1;
                break;
            }
        }
    }

    Ok(Scene {
        seed,
        config: config.clone(),
        static_primitives: statics,
        tracks,
        frame_count: config.frame_count,
        ego_poses,
    })
}
