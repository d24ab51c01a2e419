//! Operation and memory model per stride, with the cascade priced at the
//! occupancy the shipped baseline actually predicts.

use occ_core::conet::extract_occupied;
use occ_core::net::{baseline_forward, flop_count, memory_bytes, CostReport, EncoderConfig, HeadConfig, Modality, Stage};
use occ_core::synth::{capture_frame, generate_scene, SceneConfig};
use occ_core::GridSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = GridSpec::standard();
    let scene = generate_scene(42, &SceneConfig::default())?;
    let frame = capture_frame(&scene, scene.frame_count / 2)?;
    let m = Modality::Multimodal;

    println!("{:<8} {:>6} {:>10} {:>10} {:>10} {:>10} {:>9}", "stride", "occ %", "encode", "decode", "refine", "total", "mem GB");
    for stride in [1, 2, 4] {
        let cfg = EncoderConfig::with_stride(stride);
        let occupied = if stride == 1 {
            0
        } else {
            let out = baseline_forward(&frame, m, &spec, &cfg, &HeadConfig::shipped(m, stride)?)?;
            extract_occupied(&out.probs).len()
        };
        let voxels = cfg.coarse_spec(&spec).num_voxels();
        let stages = [Stage::Encode { modality: m }, Stage::Decode, Stage::Refine { modality: m, occupied, eta: stride }];
        let g: Vec<f64> = stages.iter().map(|&s| flop_count(&cfg, &spec, s) / 1e9).collect();
        let mem = stages.iter().map(|&s| memory_bytes(&cfg, &spec, s)).fold(0.0, f64::max) / 1e9;
        println!(
            "{:<8} {:>6.2} {:>10.3} {:>10.3} {:>10.3} {:>10.3} {:>9.3}",
            format!("S={stride}"),
            100.0 * occupied as f64 / voxels as f64,
            g[0],
            g[1],
            g[2],
            g.iter().sum::<f64>(),
            mem
        );
    }
    let (c2, c4) = (EncoderConfig::with_stride(2), EncoderConfig::with_stride(4));
    println!("decoder S=2/S=4: {:.2}", flop_count(&c2, &spec, Stage::Decode) / flop_count(&c4, &spec, Stage::Decode));
    println!("{}", serde_json::to_string(&CostReport::new(&c4, &spec, Stage::Decode))?);
    Ok(())
}
