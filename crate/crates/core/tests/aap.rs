use std::collections::HashMap;

use occ_core::aap::{apply_edits, augment, densification_stats, superimpose, voxelize, voxelize_points, Edit, EditJournal, SuperimposedCloud};
use occ_core::geometry::{BoundingBox, Pose};
use occ_core::grid::{DenseLabelGrid, GridSpec};
use occ_core::labels::Label;
use occ_core::synth::{capture_frame, generate_scene, FrameSensorData, LidarPoint, ObjectTrack, PointCloud, SceneConfig};
use occ_core::Error;
use proptest::prelude::*;

fn lidar_frame(index: usize, points: Vec<LidarPoint>) -> FrameSensorData {
    FrameSensorData {
        frame_index: index,
        point_cloud: PointCloud::new(points),
        cameras: vec![],
        semantic_images: vec![],
        depth_images: vec![],
    }
}

fn pt(position: [f64; 3], label: Label, instance: Option<u32>) -> LidarPoint {
    LidarPoint { position, label, instance }
}

fn close(a: [f64; 3], b: [f64; 3]) -> bool {
    (0..3).all(|k| (a[k] - b[k]).abs() < 1e-9)
}

#[test]
fn single_frame_is_identity() {
    let pts = vec![pt([1.0, 2.0, 0.5], Label::MANMADE, None), pt([-3.0, 0.0, -1.0], Label::DRIVE_SURFACE, None)];
    let cloud = superimpose(&[lidar_frame(0, pts.clone())], 0, &[Pose::identity()], &[]).unwrap();
    assert_eq!(cloud.points.len(), 2);
    for (a, b) in cloud.points.iter().zip(&pts) {
        assert_eq!((a.position, a.label, a.dynamic), (b.position, b.label, false));
    }
}

#[test]
fn static_wall_lands_on_one_spot() {
    // Ego moves 1 m along x between frames; the wall point sits at world x = 10.
    let poses = [Pose::identity(), Pose::translation([1.0, 0.0, 0.0])];
    let frames = [
        lidar_frame(0, vec![pt([10.0, 0.0, 0.0], Label::MANMADE, None)]),
        lidar_frame(1, vec![pt([9.0, 0.0, 0.0], Label::MANMADE, None)]),
    ];
    let cloud = superimpose(&frames, 1, &poses, &[]).unwrap();
    assert!(cloud.points.iter().all(|p| close(p.position, [9.0, 0.0, 0.0])));
    let cloud = superimpose(&frames, 0, &poses, &[]).unwrap();
    assert!(cloud.points.iter().all(|p| close(p.position, [10.0, 0.0, 0.0])));
}

#[test]
fn dynamic_point_follows_its_box() {
    let size = [4.0, 2.0, 1.6];
    let b0 = BoundingBox { center: [5.0, 0.0, 0.8], size, yaw: 0.0 };
    let b1 = BoundingBox { center: [7.0, 2.0, 0.8], size, yaw: std::f64::consts::FRAC_PI_2 };
    let track = ObjectTrack { instance_id: 1, class: Label::CAR, boxes: vec![Some(b0), Some(b1)] };
    let frames = [lidar_frame(0, vec![pt([5.5, 0.2, 1.0], Label::CAR, Some(1))]), lidar_frame(1, vec![])];
    let poses = [Pose::identity(), Pose::identity()];
    let cloud = superimpose(&frames, 1, &poses, std::slice::from_ref(&track)).unwrap();
    let p = cloud.points[0];
    // Box-frame offset (0.5, 0.2, 0.2) rotated by 90 degrees.
    assert!(close(p.position, [6.8, 2.5, 1.0]), "{:?}", p.position);
    assert!(p.dynamic && b1.contains(p.position));

    let gone = ObjectTrack { boxes: vec![Some(b0), None], ..track.clone() };
    assert!(superimpose(&frames, 1, &poses, &[gone]).unwrap().points.is_empty());
    assert_eq!(superimpose(&frames, 1, &poses, &[]), Err(Error::MissingTrack(1)));
    assert_eq!(superimpose(&frames, 5, &poses, &[track]), Err(Error::FrameOutOfRange(5)));
}

#[test]
fn voxelize_examples() {
    let spec = GridSpec::new([0.0; 3], 1.0, [2, 2, 2]).unwrap();
    let g = voxelize_points([([0.5, 0.5, 0.5], Label::CAR), ([0.6, 0.4, 0.5], Label::CAR), ([0.7, 0.5, 0.5], Label::BICYCLE)], &spec);
    assert_eq!(g.get([0, 0, 0]), Label::CAR);
    assert_eq!(g.occupied_count(), 1);
    // x=1.5, z=0.5 lands at index (0,0,1)
    let g = voxelize_points([([1.5, 0.5, 0.5], Label::TERRAIN), ([5.0, 0.5, 0.5], Label::TERRAIN)], &spec);
    assert_eq!(g.get([0, 0, 1]), Label::TERRAIN);
    assert_eq!(g.occupied_count(), 1);
    assert_eq!(voxelize_points(std::iter::empty(), &spec).occupied_count(), 0);
}

fn label_strategy() -> impl Strategy<Value = Label> {
    (0u8..=16).prop_map(|id| Label::new(id).unwrap())
}

fn hash_vote(points: &[([f64; 3], Label)], spec: &GridSpec) -> HashMap<[usize; 3], Label> {
    let mut counts: HashMap<[usize; 3], HashMap<u8, usize>> = HashMap::new();
    for (p, l) in points {
        let idx = [(p[2] - spec.origin[2]) / spec.voxel_size, (p[1] - spec.origin[1]) / spec.voxel_size, (p[0] - spec.origin[0]) / spec.voxel_size];
        if idx.iter().zip(spec.dims).all(|(&i, n)| i >= 0.0 && (i.floor() as usize) < n) {
            *counts.entry(idx.map(|i| i.floor() as usize)).or_default().entry(l.id()).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .map(|(k, c)| {
            let best = c.iter().map(|(&id, &n)| (n, std::cmp::Reverse(id))).max().unwrap().1 .0;
            (k, Label::new(best).unwrap())
        })
        .collect()
}

fn points_strategy() -> impl Strategy<Value = Vec<([f64; 3], Label)>> {
    // Coordinates on a 1/8 lattice avoid ties with voxel faces.
    prop::collection::vec(((-4i32..36, -4i32..36, -4i32..36), label_strategy()), 0..300)
        .prop_map(|v| v.into_iter().map(|((x, y, z), l)| ([x as f64 / 8.0 + 1.0 / 16.0, y as f64 / 8.0 + 1.0 / 16.0, z as f64 / 8.0 + 1.0 / 16.0], l)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn voxelize_matches_hash_vote(points in points_strategy()) {
        let spec = GridSpec::new([0.0; 3], 1.0, [4, 4, 4]).unwrap();
        let g = voxelize_points(points.iter().copied(), &spec);
        let want = hash_vote(&points, &spec);
        prop_assert_eq!(g.occupied_count(), want.len());
        for (idx, l) in want {
            prop_assert_eq!(g.get(idx), l);
        }
    }

    #[test]
    fn voxelize_ignores_order_and_repetition(points in points_strategy(), k in 1usize..4, seed in any::<u64>()) {
        let spec = GridSpec::new([0.0; 3], 1.0, [4, 4, 4]).unwrap();
        let g = voxelize_points(points.iter().copied(), &spec);
        let repeated: Vec<_> = points.iter().flat_map(|&p| std::iter::repeat(p).take(k)).collect();
        prop_assert_eq!(&voxelize_points(repeated, &spec), &g);
        let mut shuffled = points.clone();
        let mut rng = occ_core::synth::SplitMix64::new(seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.next_u64() as usize % (i + 1));
        }
        prop_assert_eq!(&voxelize_points(shuffled, &spec), &g);
    }

    #[test]
    fn augment_counts(init in prop::collection::vec(0u8..=17, 32 * 32 * 32), pseudo in prop::collection::vec(1u8..=17, 32 * 32 * 32)) {
        let spec = GridSpec::new([0.0; 3], 1.0, [32, 32, 32]).unwrap();
        let to_grid = |v: &[u8]| DenseLabelGrid::from_labels(spec, v.iter().map(|&i| Label::new(i).unwrap()).collect()).unwrap();
        let (gi, gp) = (to_grid(&init), to_grid(&pseudo));
        let aug = augment(&gi, &gp).unwrap();
        let filled = init.iter().zip(&pseudo).filter(|(&i, &p)| i == 17 && p != 17).count();
        let kept = init.iter().filter(|&&i| i != 17).count();
        prop_assert_eq!(aug.occupied_count(), kept + filled);
        for ((a, &i), &p) in aug.labels().iter().zip(&init).zip(&pseudo) {
            prop_assert_eq!(a.id(), if i == 17 { p } else { i });
        }
        let s = densification_stats(&gi, &aug).unwrap();
        prop_assert!(s.ratio >= 1.0);
    }

    #[test]
    fn edits_match_replay(raw in prop::collection::vec((0usize..6, 0usize..6, 0usize..6, 0u8..=17), 0..80)) {
        let spec = GridSpec::new([0.0; 3], 1.0, [6, 6, 6]).unwrap();
        let base = DenseLabelGrid::empty(spec);
        let journal = EditJournal {
            frame_index: 0,
            edits: raw.iter().enumerate().map(|(i, &(z, y, x, l))| Edit { z, y, x, label: Label::new(l).unwrap(), author: "p".into(), ts: i as i64 }).collect(),
        };
        let out = apply_edits(&base, &journal).unwrap();
        let mut last = HashMap::new();
        for &(z, y, x, l) in &raw {
            last.insert([z, y, x], l);
        }
        for z in 0..6 {
            for y in 0..6 {
                for x in 0..6 {
                    prop_assert_eq!(out.get([z, y, x]).id(), *last.get(&[z, y, x]).unwrap_or(&17));
                }
            }
        }
        prop_assert_eq!(EditJournal::from_jsonl(0, &journal.to_jsonl()).unwrap(), journal);
    }
}

#[test]
fn out_of_bounds_edit_rejects_journal() {
    let spec = GridSpec::new([0.0; 3], 1.0, [2, 2, 2]).unwrap();
    let base = DenseLabelGrid::empty(spec);
    let edit = |x| Edit { z: 0, y: 0, x, label: Label::CAR, author: "a".into(), ts: 0 };
    let j = EditJournal { frame_index: 0, edits: vec![edit(0), edit(2)] };
    assert!(matches!(apply_edits(&base, &j), Err(Error::OutOfBounds { .. })));
}

#[test]
fn more_frames_denser_grid() {
    let scene = generate_scene(21, &SceneConfig::default()).unwrap();
    let spec = GridSpec::standard();
    let target = scene.frame_count / 2;
    let frames: Vec<_> = (0..scene.frame_count).map(|f| capture_frame(&scene, f).unwrap()).collect();
    let single = superimpose(&frames[target..=target], target, &scene.ego_poses, &scene.tracks).unwrap();
    let all = superimpose(&frames, target, &scene.ego_poses, &scene.tracks).unwrap();
    assert!(all.points.len() > single.points.len());
    let g1 = voxelize(&single, &spec);
    let gk = voxelize(&all, &spec);
    assert!(gk.occupied_count() > g1.occupied_count(), "{} vs {}", gk.occupied_count(), g1.occupied_count());
    let cloud = SuperimposedCloud { target_frame: target, points: vec![] };
    assert_eq!(voxelize(&cloud, &spec).occupied_count(), 0);
}
