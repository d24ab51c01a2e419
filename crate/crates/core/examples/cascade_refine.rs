//! Refines a coarse prediction: occupied coarse voxels are split into
//! η³ queries, sampled from the images and the fused volume, and classified.
//!
//! cargo run --example cascade_refine -- [camera|lidar|multimodal] [ETA]

use occ_core::conet::{extract_occupied, refine_from, FineFusionConfig};
use occ_core::eval::{evaluate, evaluate_labels, report_table};
use occ_core::net::{baseline_forward, EncoderConfig, HeadConfig, Modality};
use occ_core::synth::{capture_frame, generate_scene, ground_truth_occupancy, SceneConfig};
use occ_core::GridSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let modality: Modality = args.next().map(|s| s.parse()).transpose()?.unwrap_or(Modality::Multimodal);
    let eta: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(4);
    let stride = 4;
    let spec = GridSpec::standard();
    let scene = generate_scene(13, &SceneConfig::default())?;
    let f = scene.frame_count / 2;
    let frame = capture_frame(&scene, f)?;
    let gt = ground_truth_occupancy(&scene, f, &spec)?;

    let cfg = EncoderConfig::with_stride(stride);
    let coarse = baseline_forward(&frame, modality, &spec, &cfg, &HeadConfig::shipped(modality, stride)?)?;
    let occupied = extract_occupied(&coarse.probs).len();
    let t = std::time::Instant::now();
    let fine = refine_from(&coarse, &frame, &FineFusionConfig::shipped(modality, stride)?, eta)?;
    println!(
        "{modality}: {occupied} of {} coarse voxels occupied ({:.2}%), {} queries, fine grid {:?}, {:.2}s",
        coarse.probs.num_voxels(),
        100.0 * occupied as f64 / coarse.probs.num_voxels() as f64,
        fine.queries.len(),
        fine.labels.spec().dims,
        t.elapsed().as_secs_f64()
    );
    let rows = vec![
        (format!("S={stride} upsampled"), evaluate(&coarse.probs, &gt)?),
        (format!("S={stride} eta={eta}"), evaluate_labels(&fine.labels, &gt)?),
    ];
    println!("{}", report_table(&rows));
    Ok(())
}
