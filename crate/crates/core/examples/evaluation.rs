//! Scores corrupted copies of a ground-truth grid to show how geometric IoU
//! and semantic mIoU react to label noise and to missing geometry.

use occ_core::eval::{accumulate, evaluate_labels, report_table};
use occ_core::synth::{generate_scene, ground_truth_occupancy, SceneConfig, SplitMix64};
use occ_core::{DenseLabelGrid, GridSpec, Label};

fn corrupt(gt: &DenseLabelGrid, rng: &mut SplitMix64, relabel: f64, drop: f64) -> DenseLabelGrid {
    let mut g = gt.clone();
    for l in g.labels_mut() {
        if l.is_semantic() {
            if rng.chance(drop) {
                *l = Label::EMPTY;
            } else if rng.chance(relabel) {
                *l = Label::new(1 + rng.below(16) as u8).unwrap();
            }
        }
    }
    g
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scene = generate_scene(21, &SceneConfig::default())?;
    let gt = ground_truth_occupancy(&scene, scene.frame_count / 2, &GridSpec::standard())?;
    let mut rng = SplitMix64::new(1);
    let mut rows = vec![("exact".to_string(), evaluate_labels(&gt, &gt)?)];
    for (relabel, drop) in [(0.1, 0.0), (0.3, 0.0), (0.0, 0.3), (0.3, 0.3)] {
        let pred = corrupt(&gt, &mut rng, relabel, drop);
        rows.push((format!("re{:.0}/dr{:.0}", relabel * 100.0, drop * 100.0), evaluate_labels(&pred, &gt)?));
    }
    println!("{}", report_table(&rows));
    let c = accumulate(&gt, &gt)?;
    println!("counted {} voxels, {} occupied", c.counted, c.tp_o);
    println!("{}", rows[1].1.to_json());
    Ok(())
}
