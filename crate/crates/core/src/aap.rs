//! Augment-and-purify: multi-frame superimposition, voxelization, pseudo-label
//! augmentation and replay of human edits.

use serde::{Deserialize, Serialize};

use crate::geometry::{Pose, Vec3};
use crate::grid::{DenseLabelGrid, GridSpec};
use crate::labels::{Label, NUM_LABELS};
use crate::synth::{FrameSensorData, ObjectTrack};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuperPoint {
    /// Target-frame ego coordinates.
    pub position: Vec3,
    pub label: Label,
    pub instance: Option<u32>,
    pub dynamic: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuperimposedCloud {
    pub target_frame: usize,
    pub points: Vec<SuperPoint>,
}

/// Merges every frame's LiDAR points into the ego frame of `target_frame`.
///
/// Static points follow the ego poses. Points with an instance id are carried
/// in their object's box frame and re-placed with the box of the target frame;
/// objects absent there are dropped.
pub fn superimpose(
    frames: &[FrameSensorData],
    target_frame: usize,
    ego_poses: &[Pose],
    tracks: &[ObjectTrack],
) -> Result<SuperimposedCloud> {
    if !frames.iter().any(|f| f.frame_index == target_frame) {
        return Err(Error::FrameOutOfRange(target_frame));
    }
    let target_from_world = ego_poses.get(target_frame).ok_or(Error::FrameOutOfRange(target_frame))?.inverse();
    let mut points = Vec::new();
    for frame in frames {
        let s = frame.frame_index;
        let world_from_src = ego_poses.get(s).ok_or(Error::FrameOutOfRange(s))?;
        let target_from_src = target_from_world.compose(world_from_src);
        for p in &frame.point_cloud.points {
            match p.instance {
                None => points.push(SuperPoint {
                    position: target_from_src.apply(p.position),
                    label: p.label,
                    instance: None,
                    dynamic: false,
                }),
                Some(id) => {
                    let track = tracks.iter().find(|t| t.instance_id == id).ok_or(Error::MissingTrack(id))?;
                    let src_box = track.box_at(s).ok_or(Error::MissingTrack(id))?;
                    let Some(dst_box) = track.box_at(target_frame) else {
                        continue;
                    };
                    let in_box = src_box.world_from_box().inverse().apply(world_from_src.apply(p.position));
                    let world = dst_box.world_from_box().apply(in_box);
                    points.push(SuperPoint {
                        position: target_from_world.apply(world),
                        label: p.label,
                        instance: Some(id),
                        dynamic: true,
                    });
                }
            }
        }
    }
    Ok(SuperimposedCloud { target_frame, points })
}

/// Majority label per voxel (lowest id on ties); points outside the grid are ignored.
pub fn voxelize(cloud: &SuperimposedCloud, spec: &GridSpec) -> DenseLabelGrid {
    voxelize_points(cloud.points.iter().map(|p| (p.position, p.label)), spec)
}

pub fn voxelize_points(points: impl IntoIterator<Item = (Vec3, Label)>, spec: &GridSpec) -> DenseLabelGrid {
    let mut keyed: Vec<(usize, u8)> = points
        .into_iter()
        .filter_map(|(p, l)| spec.voxel_of(p).map(|idx| (spec.linear_index(idx), l.id())))
        .collect();
    keyed.sort_unstable();
    let mut grid = DenseLabelGrid::empty(*spec);
    let labels = grid.labels_mut();
    let mut i = 0;
    while i < keyed.len() {
        let voxel = keyed[i].0;
        let mut counts = [0u32; NUM_LABELS];
        while i < keyed.len() && keyed[i].0 == voxel {
            counts[keyed[i].1 as usize] += 1;
            i += 1;
        }
        let mut best = 0;
        for (c, &n) in counts.iter().enumerate() {
            if n > counts[best] {
                best = c;
            }
        }
        labels[voxel] = Label::from_channel(best);
    }
    grid
}

/// Fills only the empty voxels of `v_init` from `v_pseudo`.
pub fn augment(v_init: &DenseLabelGrid, v_pseudo: &DenseLabelGrid) -> Result<DenseLabelGrid> {
    v_init.spec().ensure_compatible(v_pseudo.spec())?;
    if v_pseudo.labels().iter().any(|l| l.is_noise()) {
        return Err(Error::NoiseInPseudo);
    }
    let labels = v_init
        .labels()
        .iter()
        .zip(v_pseudo.labels())
        .map(|(&init, &pseudo)| if init.is_occupied() { init } else { pseudo })
        .collect();
    DenseLabelGrid::from_labels(*v_init.spec(), labels)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edit {
    pub z: usize,
    pub y: usize,
    pub x: usize,
    pub label: Label,
    pub author: String,
    pub ts: i64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditJournal {
    pub frame_index: usize,
    pub edits: Vec<Edit>,
}

impl EditJournal {
    pub fn new(frame_index: usize) -> Self {
        EditJournal { frame_index, edits: Vec::new() }
    }

    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        self.edits.iter().map(|e| serde_json::to_string(e).expect("edit serializes") + "\n").collect()
    }

    pub fn from_jsonl(frame_index: usize, text: &str) -> Result<Self> {
        let edits = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| Error::Parse(e.to_string())))
            .collect::<Result<_>>()?;
        Ok(EditJournal { frame_index, edits })
    }

    pub fn validate(&self, spec: &GridSpec) -> Result<()> {
        for e in &self.edits {
            let idx = [e.z as i64, e.y as i64, e.x as i64];
            if !spec.contains_index(idx) {
                return Err(spec.out_of_bounds(idx));
            }
        }
        Ok(())
    }
}

/// Replays `journal` over `v_aug` in order. Any out-of-bounds edit rejects the whole journal.
pub fn apply_edits(v_aug: &DenseLabelGrid, journal: &EditJournal) -> Result<DenseLabelGrid> {
    journal.validate(v_aug.spec())?;
    let mut out = v_aug.clone();
    for e in &journal.edits {
        out.set([e.z, e.y, e.x], e.label);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensificationStats {
    pub count_init: usize,
    pub count_aug: usize,
    /// `count_aug / count_init`; 1 when both are zero.
    pub ratio: f64,
}

pub fn densification_stats(v_init: &DenseLabelGrid, v_aug: &DenseLabelGrid) -> Result<DensificationStats> {
    v_init.spec().ensure_compatible(v_aug.spec())?;
    let count_init = v_init.occupied_count();
    let count_aug = v_aug.occupied_count();
    let ratio = match (count_init, count_aug) {
        (0, 0) => 1.0,
        (0, _) => f64::INFINITY,
        (a, b) => b as f64 / a as f64,
    };
    Ok(DensificationStats { count_init, count_aug, ratio })
}
