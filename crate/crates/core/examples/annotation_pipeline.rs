//! Augment-and-purify on one frame: superimpose sparse sweeps, voxelize,
//! fill the gaps from baseline pseudo labels, then replay a few manual edits.
//!
//! cargo run --example annotation_pipeline -- [RINGS]

use occ_core::aap::{apply_edits, augment, densification_stats, superimpose, voxelize, Edit, EditJournal};
use occ_core::eval::evaluate_labels;
use occ_core::net::{baseline_forward, predict_labels, EncoderConfig, HeadConfig, Modality};
use occ_core::synth::{capture_frame, capture_frame_with, generate_scene, ground_truth_occupancy, SceneConfig};
use occ_core::GridSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rings: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(8);
    let spec = GridSpec::standard();
    let scene = generate_scene(3, &SceneConfig::default())?;
    let target = scene.frame_count / 2;
    let gt = ground_truth_occupancy(&scene, target, &spec)?;

    let mut lidar = scene.config.lidar.clone();
    lidar.channels = rings;
    let sweeps = (0..scene.frame_count).map(|f| capture_frame_with(&scene, f, &lidar)).collect::<Result<Vec<_>, _>>()?;
    let single = voxelize(&superimpose(&sweeps[target..=target], target, &scene.ego_poses, &scene.tracks)?, &spec);
    let cloud = superimpose(&sweeps, target, &scene.ego_poses, &scene.tracks)?;
    let dynamic = cloud.points.iter().filter(|p| p.dynamic).count();
    let v_init = voxelize(&cloud, &spec);
    println!("{rings}-ring sweeps: {} points ({dynamic} re-placed in moving boxes)", cloud.points.len());
    println!("occupied voxels: single sweep {}, all sweeps {}", single.occupied_count(), v_init.occupied_count());

    let cfg = EncoderConfig::with_stride(4);
    let head = HeadConfig::shipped(Modality::Multimodal, 4)?;
    let frame = capture_frame(&scene, target)?;
    let v_pseudo = predict_labels(&baseline_forward(&frame, Modality::Multimodal, &spec, &cfg, &head)?, &spec)?;
    let v_aug = augment(&v_init, &v_pseudo)?;
    let s = densification_stats(&v_init, &v_aug)?;
    println!("v_aug: {} occupied, ratio {:.2}", s.count_aug, s.ratio);

    // Purify: relabel the first few disagreements with the ground truth.
    let mut journal = EditJournal::new(target);
    for (i, (&a, &g)) in v_aug.labels().iter().zip(gt.labels()).enumerate() {
        if a != g && !g.is_noise() {
            let [z, y, x] = spec.unravel(i);
            journal.edits.push(Edit { z, y, x, label: g, author: "example".into(), ts: journal.edits.len() as i64 });
            if journal.edits.len() == 1000 {
                break;
            }
        }
    }
    let v_final = apply_edits(&v_aug, &journal)?;
    for (name, grid) in [("v_init", &v_init), ("v_aug", &v_aug), ("v_final", &v_final)] {
        let r = evaluate_labels(grid, &gt)?;
        println!("{name:<8} IoU {:.4} mIoU {:.4}", r.iou, r.miou);
    }
    println!("journal: {} edits, first {}", journal.edits.len(), journal.to_jsonl().lines().next().unwrap_or(""));
    assert!(v_init.labels().iter().zip(v_aug.labels()).all(|(a, b)| a.is_empty() || a == b));
    Ok(())
}
