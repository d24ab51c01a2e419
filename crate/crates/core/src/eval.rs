//! Geometric IoU and semantic mIoU with ground-truth noise masked out.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grid::DenseLabelGrid;
use crate::labels::{Label, NUM_SEMANTIC};
use crate::volume::{upsample_argmax, FeatureVolume};
use crate::Result;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    /// Per semantic class, index `id - 1`.
    pub tp: [u64; NUM_SEMANTIC],
    pub fp: [u64; NUM_SEMANTIC],
    #[serde(rename = "fn")]
    pub fn_: [u64; NUM_SEMANTIC],
    pub tp_o: u64,
    pub fp_o: u64,
    pub fn_o: u64,
    /// Voxels not masked by ground-truth noise.
    pub counted: u64,
}

impl ConfusionCounts {
    /// Adds one voxel pair.
    pub fn add(&mut self, pred: Label, gt: Label) {
        if gt.is_noise() {
            return;
        }
        self.counted += 1;
        match (pred.is_occupied(), gt.is_occupied()) {
            (true, true) => self.tp_o += 1,
            (true, false) => self.fp_o += 1,
            (false, true) => self.fn_o += 1,
            (false, false) => {}
        }
        let class = |l: Label| l.is_semantic().then(|| l.index() - 1);
        match (class(pred), class(gt)) {
            (Some(p), Some(g)) if p == g => self.tp[p] += 1,
            (p, g) => {
                if let Some(p) = p {
                    self.fp[p] += 1;
                }
                if let Some(g) = g {
                    self.fn_[g] += 1;
                }
            }
        }
    }

    pub fn merge(mut self, other: &ConfusionCounts) -> ConfusionCounts {
        for c in 0..NUM_SEMANTIC {
            self.tp[c] += other.tp[c];
            self.fp[c] += other.fp[c];
            self.fn_[c] += other.fn_[c];
        }
        self.tp_o += other.tp_o;
        self.fp_o += other.fp_o;
        self.fn_o += other.fn_o;
        self.counted += other.counted;
        self
    }
}

fn ratio(tp: u64, fp: u64, fn_: u64) -> f64 {
    let denom = tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        tp as f64 / denom as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub iou: f64,
    pub miou: f64,
    /// Semantic classes in label-id order.
    pub per_class_iou: [f64; NUM_SEMANTIC],
    pub counted_voxels: u64,
}

impl EvalResult {
    /// Undefined ratios (nothing predicted or present) count as 0; mIoU always divides by 16.
    pub fn from_counts(c: &ConfusionCounts) -> Self {
        let per_class_iou: [f64; NUM_SEMANTIC] = std::array::from_fn(|k| ratio(c.tp[k], c.fp[k], c.fn_[k]));
        EvalResult {
            iou: ratio(c.tp_o, c.fp_o, c.fn_o),
            miou: per_class_iou.iter().sum::<f64>() / NUM_SEMANTIC as f64,
            per_class_iou,
            counted_voxels: c.counted,
        }
    }

    /// `{"iou":…,"miou":…,"per_class":{name:…}}` with four decimals.
    pub fn to_json(&self) -> String {
        let mut s = format!("{{\"iou\":{:.4},\"miou\":{:.4},\"per_class\":{{", self.iou, self.miou);
        for (i, (label, v)) in Label::semantic().zip(self.per_class_iou).enumerate() {
            if i > 0 {
                s.push(',');
            }
            let _ = write!(s, "{}:{v:.4}", serde_json::Value::String(label.name().into()));
        }
        s.push_str("}}");
        s
    }
}

/// Confusion counts over every voxel whose ground truth is not noise.
pub fn accumulate(pred: &DenseLabelGrid, gt: &DenseLabelGrid) -> Result<ConfusionCounts> {
    pred.spec().ensure_compatible(gt.spec())?;
    Ok(pred
        .labels()
        .par_chunks(1 << 16)
        .zip(gt.labels().par_chunks(1 << 16))
        .map(|(p, g)| {
            let mut c = ConfusionCounts::default();
            for (&a, &b) in p.iter().zip(g) {
                c.add(a, b);
            }
            c
        })
        .reduce(ConfusionCounts::default, |a, b| a.merge(&b)))
}

/// Resamples a probability volume onto the ground-truth grid, takes the argmax and scores it.
pub fn evaluate(pred_probs: &FeatureVolume, gt: &DenseLabelGrid) -> Result<EvalResult> {
    let spec = *gt.spec();
    let labels = upsample_argmax(pred_probs, spec.dims, true)?;
    evaluate_labels(&DenseLabelGrid::from_labels(spec, labels)?, gt)
}

/// Scores labels already on the ground-truth grid.
pub fn evaluate_labels(pred: &DenseLabelGrid, gt: &DenseLabelGrid) -> Result<EvalResult> {
    Ok(EvalResult::from_counts(&accumulate(pred, gt)?))
}

/// Text table: IoU, mIoU, then the 16 classes, in percent with one decimal.
pub fn report_table(results: &[(String, EvalResult)]) -> String {
    let name_width = results.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(6);
    let mut header = format!("{:<name_width$} {:>6} {:>6}", "method", "IoU", "mIoU");
    for l in Label::semantic() {
        let _ = write!(header, " {:>12}", l.name());
    }
    let mut out = header.trim_end().to_string();
    out.push('\n');
    for (name, r) in results {
        let mut row = format!("{:<name_width$} {:>6.1} {:>6.1}", name, 100.0 * r.iou, 100.0 * r.miou);
        for v in r.per_class_iou {
            let _ = write!(row, " {:>12.1}", 100.0 * v);
        }
        out.push_str(&row);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn grid(cells: &[([usize; 3], Label)]) -> DenseLabelGrid {
        let mut g = DenseLabelGrid::empty(GridSpec::new([0.0; 3], 1.0, [2, 2, 2]).unwrap());
        for &(i, l) in cells {
            g.set(i, l);
        }
        g
    }

    #[test]
    fn third_overlap() {
        let pred = grid(&[([0, 0, 0], Label::CAR), ([0, 0, 1], Label::CAR)]);
        let gt = grid(&[([0, 0, 1], Label::CAR), ([0, 1, 0], Label::CAR)]);
        let c = accumulate(&pred, &gt).unwrap();
        assert_eq!((c.tp_o, c.fp_o, c.fn_o), (1, 1, 1));
        let r = EvalResult::from_counts(&c);
        assert!((r.iou - 1.0 / 3.0).abs() < 1e-15);
        assert!((r.per_class_iou[Label::CAR.index() - 1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn noise_masked() {
        let pred = grid(&[([1, 1, 1], Label::CAR)]);
        let gt = grid(&[([1, 1, 1], Label::NOISE)]);
        let c = accumulate(&pred, &gt).unwrap();
        assert_eq!(c, ConfusionCounts { counted: 7, ..Default::default() });
    }

    #[test]
    fn perfect_row_and_json() {
        let r = EvalResult { iou: 1.0, miou: 1.0, per_class_iou: [1.0; 16], counted_voxels: 1 };
        let table = report_table(&[("perfect".into(), r.clone())]);
        let row = table.lines().nth(1).unwrap();
        assert_eq!(row.matches("100.0").count(), 18);
        assert_eq!(report_table(&[]).lines().count(), 1);
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(json["per_class"]["drive. suf."], 1.0);
        assert!(r.to_json().starts_with("{\"iou\":1.0000,\"miou\":1.0000,"));
    }
}
