//! Cross-entropy and Lovász-softmax with analytic gradients, and the total loss.

use serde::{Deserialize, Serialize};

use crate::grid::DenseLabelGrid;
use crate::labels::{Label, NUM_LABELS};
use crate::volume::{validate_distribution, FeatureVolume};
use crate::{Error, Result};

/// Lower clamp applied before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

/// Labels skipped by both losses unless the caller says otherwise.
pub const DEFAULT_IGNORE: [Label; 1] = [Label::NOISE];

#[derive(Clone, Debug, PartialEq)]
pub struct LossValue {
    pub value: f64,
    /// Same shape as the prediction; zero on ignored voxels.
    pub gradient: FeatureVolume,
}

fn check_inputs(probs: &FeatureVolume, target: &DenseLabelGrid) -> Result<()> {
    validate_distribution(probs, 1e-6)?;
    if probs.dims() != target.spec().dims {
        return Err(Error::ShapeMismatch(format!("prediction {:?} vs target {:?}", probs.dims(), target.spec().dims)));
    }
    Ok(())
}

/// Mean `-ln p[target]` over counted voxels; the gradient is taken with respect to the logits.
pub fn cross_entropy(probs: &FeatureVolume, target: &DenseLabelGrid, ignore: &[Label]) -> Result<LossValue> {
    check_inputs(probs, target)?;
    let counted = target.labels().iter().filter(|l| !ignore.contains(l)).count();
    if counted == 0 {
        return Err(Error::AllIgnored);
    }
    let n = counted as f64;
    let mut gradient = FeatureVolume::zeros(probs.dims(), NUM_LABELS);
    let mut sum = 0.0;
    for (i, &t) in target.labels().iter().enumerate() {
        if ignore.contains(&t) {
            continue;
        }
        let p = probs.voxel_at(i);
        sum += -p[t.index()].max(PROB_FLOOR).ln();
        let g = gradient.voxel_at_mut(i);
        for (k, (gk, pk)) in g.iter_mut().zip(p).enumerate() {
            *gk = (pk - if k == t.index() { 1.0 } else { 0.0 }) / n;
        }
    }
    Ok(LossValue { value: sum / n, gradient })
}

/// Gradient of the Lovász extension of the Jaccard loss for sorted ground truth.
fn jaccard_grad(fg_sorted: &[f64]) -> Vec<f64> {
    let gts: f64 = fg_sorted.iter().sum();
    let mut out = Vec::with_capacity(fg_sorted.len());
    let (mut cum_fg, mut cum_bg) = (0.0, 0.0);
    let mut prev = 0.0;
    for &f in fg_sorted {
        cum_fg += f;
        cum_bg += 1.0 - f;
        let jaccard = 1.0 - (gts - cum_fg) / (gts + cum_bg);
        out.push(jaccard - prev);
        prev = jaccard;
    }
    out
}

/// Lovász-softmax averaged over the classes present in the target; gradient
/// with respect to the probabilities.
pub fn lovasz_softmax(probs: &FeatureVolume, target: &DenseLabelGrid, ignore: &[Label]) -> Result<LossValue> {
    check_inputs(probs, target)?;
    let voxels: Vec<usize> = (0..target.labels().len()).filter(|&i| !ignore.contains(&target.labels()[i])).collect();
    if voxels.is_empty() {
        return Err(Error::AllIgnored);
    }
    let present: Vec<Label> = Label::all()
        .filter(|c| !ignore.contains(c) && voxels.iter().any(|&i| target.labels()[i] == *c))
        .collect();
    let mut gradient = FeatureVolume::zeros(probs.dims(), NUM_LABELS);
    let scale = 1.0 / present.len() as f64;
    let mut total = 0.0;
    for c in present {
        let k = c.index();
        let mut entries: Vec<(f64, f64, usize)> = voxels
            .iter()
            .map(|&i| {
                let fg = if target.labels()[i] == c { 1.0 } else { 0.0 };
                ((fg - probs.voxel_at(i)[k]).abs(), fg, i)
            })
            .collect();
        // Descending errors; index order keeps ties deterministic.
        entries.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.2.cmp(&b.2)));
        let fg_sorted: Vec<f64> = entries.iter().map(|e| e.1).collect();
        let grad = jaccard_grad(&fg_sorted);
        for ((err, fg, i), g) in entries.into_iter().zip(grad) {
            total += err * g;
            // d|fg - p| / dp is -1 on foreground, +1 elsewhere.
            let sign = if fg == 1.0 { -1.0 } else { 1.0 };
            gradient.voxel_at_mut(i)[k] += sign * g * scale;
        }
    }
    Ok(LossValue { value: total * scale, gradient })
}

/// Loss terms computed elsewhere; they default to zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExternalTerms {
    pub l_scal_geo: f64,
    pub l_scal_sem: f64,
    pub l_d: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub l_ce: f64,
    pub l_ls: f64,
    pub l_scal_geo: f64,
    pub l_scal_sem: f64,
    pub l_d: f64,
    pub l_total: f64,
}

/// Unit-weight sum of all five terms.
pub fn total_loss(l_ce: f64, l_ls: f64, external: ExternalTerms) -> Result<LossReport> {
    let ExternalTerms { l_scal_geo, l_scal_sem, l_d } = external;
    if [l_ce, l_ls, l_scal_geo, l_scal_sem, l_d].iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("loss term"));
    }
    Ok(LossReport { l_ce, l_ls, l_scal_geo, l_scal_sem, l_d, l_total: l_ce + l_ls + l_scal_geo + l_scal_sem + l_d })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn one_voxel(label: Label) -> DenseLabelGrid {
        DenseLabelGrid::from_labels(GridSpec::new([0.0; 3], 1.0, [1, 1, 1]).unwrap(), vec![label]).unwrap()
    }

    #[test]
    fn uniform_cross_entropy() {
        let p = FeatureVolume::constant([1, 1, 1], &[1.0 / 18.0; 18]);
        let l = cross_entropy(&p, &one_voxel(Label::CAR), &DEFAULT_IGNORE).unwrap();
        assert!((l.value - 18f64.ln()).abs() < 1e-12);
        assert!((l.value - 2.890372).abs() < 1e-6);
    }

    #[test]
    fn perfect_predictions_cost_nothing() {
        let mut onehot = [0.0; 18];
        onehot[Label::CAR.index()] = 1.0;
        let p = FeatureVolume::constant([1, 1, 1], &onehot);
        let t = one_voxel(Label::CAR);
        assert_eq!(cross_entropy(&p, &t, &DEFAULT_IGNORE).unwrap().value, 0.0);
        assert_eq!(lovasz_softmax(&p, &t, &DEFAULT_IGNORE).unwrap().value, 0.0);
    }

    #[test]
    fn lovasz_single_voxel() {
        let mut p = [0.0; 18];
        p[Label::CAR.index()] = 0.3;
        p[Label::TRUCK.index()] = 0.7;
        let p = FeatureVolume::constant([1, 1, 1], &p);
        let l = lovasz_softmax(&p, &one_voxel(Label::CAR), &DEFAULT_IGNORE).unwrap();
        assert!((l.value - 0.7).abs() < 1e-12);
    }

    #[test]
    fn all_ignored() {
        let p = FeatureVolume::constant([1, 1, 1], &[1.0 / 18.0; 18]);
        let t = one_voxel(Label::NOISE);
        assert_eq!(cross_entropy(&p, &t, &DEFAULT_IGNORE), Err(Error::AllIgnored));
        assert_eq!(lovasz_softmax(&p, &t, &DEFAULT_IGNORE), Err(Error::AllIgnored));
    }

    #[test]
    fn totals() {
        assert_eq!(total_loss(1.0, 0.5, ExternalTerms::default()).unwrap().l_total, 1.5);
        assert_eq!(total_loss(0.0, 0.0, ExternalTerms::default()).unwrap().l_total, 0.0);
        let r = total_loss(2.89, 0.7, ExternalTerms { l_scal_geo: 0.1, l_scal_sem: 0.2, l_d: 0.05 }).unwrap();
        assert!((r.l_total - 3.94).abs() < 1e-12);
        assert!(total_loss(f64::NAN, 0.0, ExternalTerms::default()).is_err());
    }
}
