//! Generates a street scene, captures one frame and summarizes the LiDAR
//! sweep, the camera views and the ground-truth occupancy.
//!
//! cargo run --example scene_and_sensors -- [SEED]

use std::collections::BTreeMap;

use occ_core::synth::{capture_frame, generate_scene, ground_truth_occupancy, SceneConfig};
use occ_core::{GridSpec, Label};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(7);
    let scene = generate_scene(seed, &SceneConfig::default())?;
    let frame = scene.frame_count / 2;
    println!("seed {seed}: {} static primitives, {} tracks, {} frames", scene.static_primitives.len(), scene.tracks.len(), scene.frame_count);
    for t in &scene.tracks {
        let (a, b) = (t.boxes.first().and_then(|b| b.as_ref()), t.boxes.last().and_then(|b| b.as_ref()));
        if let (Some(a), Some(b)) = (a, b) {
            println!("  #{} {:<12} {:>6.2},{:>6.2} -> {:>6.2},{:>6.2}", t.instance_id, t.class.name(), a.center[0], a.center[1], b.center[0], b.center[1]);
        }
    }

    let data = capture_frame(&scene, frame)?;
    let mut per_label: BTreeMap<Label, usize> = BTreeMap::new();
    for p in &data.point_cloud.points {
        *per_label.entry(p.label).or_default() += 1;
    }
    println!("frame {frame}: {} LiDAR points", data.point_cloud.len());
    for (l, n) in &per_label {
        println!("  {:<22} {n}", l.name());
    }
    for (cam, (sem, depth)) in data.cameras.iter().zip(data.semantic_images.iter().zip(&data.depth_images)) {
        let hits = depth.depth.iter().filter(|&&d| d > 0.0).count();
        let near = depth.depth.iter().copied().filter(|&d| d > 0.0).fold(f64::INFINITY, f64::min);
        let fwd = cam.cam_from_world.inverse().rotate([0.0, 0.0, 1.0]);
        let yaw = fwd[1].atan2(fwd[0]).to_degrees();
        println!("  camera {}x{} facing {yaw:>6.1} deg: {hits} hit pixels, nearest {near:.2} m", sem.width, sem.height);
    }

    let gt = ground_truth_occupancy(&scene, frame, &GridSpec::standard())?;
    println!("ground truth {:?}: {} occupied voxels", gt.spec().dims, gt.occupied_count());
    std::fs::create_dir_all("target/examples")?;
    std::fs::write("target/examples/scene.json", scene.to_canonical_json())?;
    println!("wrote target/examples/scene.json");
    Ok(())
}
