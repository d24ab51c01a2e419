//! Fits head and fine-fusion coefficients on training scenes, scores the
//! trilinear baseline and the refinement on validation scenes, and optionally
//! writes the coefficient files.
//!
//! cargo run --release --example fit_coefficients -- [--out DIR] [--stride S] [--eta N] [--val-seeds 1,2,3]

use std::path::PathBuf;

use occ_core::conet::{extract_occupied, refine_from};
use occ_core::eval::{evaluate, evaluate_labels, report_table};
use occ_core::fit::{fit_fine, fit_head, FitOptions, FitSample};
use occ_core::net::{baseline_forward, EncoderConfig, Modality};
use occ_core::synth::{capture_frame, generate_scene, ground_truth_occupancy, FrameSensorData, SceneConfig};
use occ_core::{DenseLabelGrid, GridSpec};

const TRAIN_SEEDS: [u64; 4] = [1001, 1002, 1003, 1004];
const VALIDATION_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

fn frames(seeds: &[u64], spec: &GridSpec) -> occ_core::Result<Vec<(FrameSensorData, DenseLabelGrid)>> {
    let config = SceneConfig::default();
    seeds
        .iter()
        .map(|&seed| {
            let scene = generate_scene(seed, &config)?;
            let frame = scene.frame_count / 2;
            Ok((capture_frame(&scene, frame)?, ground_truth_occupancy(&scene, frame, spec)?))
        })
        .collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut out: Option<PathBuf> = None;
    let mut stride = 4;
    let mut eta = 4;
    let mut val_seeds = VALIDATION_SEEDS.to_vec();
    let mut args = std::env::args().skip(1);
    while let Some(a) = args.next() {
        match a.as_str() {
            "--out" => out = args.next().map(PathBuf::from),
            "--stride" => stride = args.next().ok_or("--stride needs a value")?.parse()?,
            "--eta" => eta = args.next().ok_or("--eta needs a value")?.parse()?,
            "--val-seeds" => {
                let list = args.next().ok_or("--val-seeds needs a value")?;
                val_seeds = list.split(',').map(|s| s.trim().parse()).collect::<Result<_, _>>()?;
            }
            other => return Err(format!("unknown argument {other}").into()),
        }
    }
    let head_opts = FitOptions::head();
    let fine_opts = FitOptions::fine();

    let spec = GridSpec::standard();
    let cfg = EncoderConfig::with_stride(stride);
    let t = std::time::Instant::now();
    let train = frames(&TRAIN_SEEDS, &spec)?;
    let validation = frames(&val_seeds, &spec)?;
    eprintln!("scenes ready in {:.1}s", t.elapsed().as_secs_f64());
    let samples: Vec<FitSample> = train.iter().map(|(frame, gt)| FitSample { frame, gt }).collect();

    let mut rows = Vec::new();
    for modality in Modality::ALL {
        let head = fit_head(&samples, modality, &spec, &cfg, &head_opts)?;
        let fine = fit_fine(&samples, modality, &spec, &cfg, &head, eta, &fine_opts)?;
        let (mut base_miou, mut fine_miou, mut base_iou, mut fine_iou, mut occ) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (i, (frame, gt)) in validation.iter().enumerate() {
            let coarse = baseline_forward(frame, modality, &spec, &cfg, &head)?;
            occ += extract_occupied(&coarse.probs).len() as f64 / coarse.probs.num_voxels() as f64;
            let b = evaluate(&coarse.probs, gt)?;
            let r = evaluate_labels(&refine_from(&coarse, frame, &fine, eta)?.labels, gt)?;
            base_miou += b.miou;
            fine_miou += r.miou;
            base_iou += b.iou;
            fine_iou += r.iou;
            if i == 0 {
                rows.push((format!("{}-base", modality.name()), b));
                rows.push((format!("{}-conet", modality.name()), r));
            }
        }
        let n = validation.len() as f64;
        println!(
            "{:<10} baseline IoU {:.4} mIoU {:.4} | refine IoU {:.4} mIoU {:.4} | ratio {:.3} | occupied {:.2}%",
            modality.name(),
            base_iou / n,
            base_miou / n,
            fine_iou / n,
            fine_miou / n,
            fine_miou / base_miou,
            100.0 * occ / n
        );
        if let Some(dir) = &out {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(format!("head_{}_s{stride}.json", modality.name())), head.to_json())?;
            std::fs::write(dir.join(format!("fine_{}_s{stride}.json", modality.name())), fine.to_json())?;
        }
    }
    println!("{}", report_table(&rows));
    eprintln!("done in {:.1}s", t.elapsed().as_secs_f64());
    Ok(())
}
