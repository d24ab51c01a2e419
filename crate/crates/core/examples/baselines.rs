//! Runs the LiDAR, camera and fused baselines on one frame and scores each
//! against the ground truth after trilinear upsampling.
//!
//! cargo run --example baselines -- [STRIDE]

use occ_core::eval::{evaluate, report_table};
use occ_core::net::{baseline_forward, fusion_gate, lidar_encode, camera_encode, EncoderConfig, FusionConfig, HeadConfig, Modality};
use occ_core::synth::{capture_frame, generate_scene, ground_truth_occupancy, SceneConfig};
use occ_core::GridSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let stride: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(4);
    let spec = GridSpec::standard();
    let scene = generate_scene(12, &SceneConfig::default())?;
    let f = scene.frame_count / 2;
    let frame = capture_frame(&scene, f)?;
    let gt = ground_truth_occupancy(&scene, f, &spec)?;
    let cfg = EncoderConfig::with_stride(stride);

    let mut rows = Vec::new();
    for m in Modality::ALL {
        let t = std::time::Instant::now();
        let out = baseline_forward(&frame, m, &spec, &cfg, &HeadConfig::shipped(m, stride)?)?;
        let r = evaluate(&out.probs, &gt)?;
        println!("{m:<10} coarse {:?} in {:.2}s", out.coarse_spec.dims, t.elapsed().as_secs_f64());
        rows.push((m.to_string(), r));
    }
    println!("{}", report_table(&rows));

    // How often the gate leans toward the LiDAR branch.
    let fl = lidar_encode(&frame.point_cloud, &spec, &cfg)?;
    let fc = camera_encode(&frame.semantic_images, &frame.depth_images, &frame.cameras, &spec, &cfg)?;
    let gate = fusion_gate(&fl, &fc, &FusionConfig::default())?;
    let lidar_side = gate.data().iter().filter(|&&w| w > 0.0).count() as f64 / gate.data().len() as f64;
    let camera_side = gate.data().iter().filter(|&&w| w < 0.0).count() as f64 / gate.data().len() as f64;
    println!("gate: {:.1}% toward LiDAR, {:.1}% toward camera", 100.0 * lidar_side, 100.0 * camera_side);
    Ok(())
}
