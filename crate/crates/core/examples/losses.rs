//! Cross-entropy and Lovász-softmax of a coarse baseline prediction against
//! block-majority targets, with the gradient magnitudes and the total loss.

use occ_core::fit::block_fractions;
use occ_core::losses::{cross_entropy, lovasz_softmax, total_loss, ExternalTerms, DEFAULT_IGNORE};
use occ_core::net::{baseline_forward, EncoderConfig, HeadConfig, Modality};
use occ_core::synth::{capture_frame, generate_scene, ground_truth_occupancy, SceneConfig};
use occ_core::volume::argmax_labels;
use occ_core::{DenseLabelGrid, GridSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = GridSpec::standard();
    let scene = generate_scene(31, &SceneConfig::default())?;
    let f = scene.frame_count / 2;
    let gt = ground_truth_occupancy(&scene, f, &spec)?;
    let target = DenseLabelGrid::from_labels(spec.downsampled(4), argmax_labels(&block_fractions(&gt, 4))?)?;

    let frame = capture_frame(&scene, f)?;
    let cfg = EncoderConfig::with_stride(4);
    for m in Modality::ALL {
        let probs = baseline_forward(&frame, m, &spec, &cfg, &HeadConfig::shipped(m, 4)?)?.probs;
        let ce = cross_entropy(&probs, &target, &DEFAULT_IGNORE)?;
        let ls = lovasz_softmax(&probs, &target, &DEFAULT_IGNORE)?;
        let norm = |v: &[f64]| v.iter().map(|g| g * g).sum::<f64>().sqrt();
        let report = total_loss(ce.value, ls.value, ExternalTerms::default())?;
        println!(
            "{m:<10} CE {:.4} (|grad| {:.2e})  Lovasz {:.4} (|grad| {:.2e})  total {:.4}",
            ce.value,
            norm(ce.gradient.data()),
            ls.value,
            norm(ls.gradient.data()),
            report.l_total
        );
    }
    Ok(())
}
