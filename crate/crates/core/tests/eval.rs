use occ_core::eval::{accumulate, evaluate, evaluate_labels, report_table, EvalResult};
use occ_core::grid::{DenseLabelGrid, GridSpec};
use occ_core::labels::{Label, NUM_LABELS};
use occ_core::volume::FeatureVolume;
use proptest::prelude::*;

fn spec() -> GridSpec {
    GridSpec::new([0.0; 3], 1.0, [4, 5, 6]).unwrap()
}

fn grid(ids: &[u8]) -> DenseLabelGrid {
    DenseLabelGrid::from_labels(spec(), ids.iter().map(|&i| Label::new(i).unwrap()).collect()).unwrap()
}

/// IoU and mIoU straight from the definitions.
fn oracle(pred: &[u8], gt: &[u8]) -> (f64, f64) {
    let ratio = |tp: usize, fp: usize, fn_: usize| if tp + fp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fp + fn_) as f64 };
    let pairs: Vec<(u8, u8)> = pred.iter().copied().zip(gt.iter().copied()).filter(|&(_, g)| g != 0).collect();
    let occ = |l: u8| l != 17;
    let tp = pairs.iter().filter(|&&(p, g)| occ(p) && occ(g)).count();
    let fp = pairs.iter().filter(|&&(p, g)| occ(p) && !occ(g)).count();
    let fn_ = pairs.iter().filter(|&&(p, g)| !occ(p) && occ(g)).count();
    let mut miou = 0.0;
    for c in 1..=16u8 {
        let tp = pairs.iter().filter(|&&(p, g)| p == c && g == c).count();
        let fp = pairs.iter().filter(|&&(p, g)| p == c && g != c).count();
        let fn_ = pairs.iter().filter(|&&(p, g)| p != c && g == c).count();
        miou += ratio(tp, fp, fn_);
    }
    (ratio(tp, fp, fn_), miou / 16.0)
}

fn labels_strategy() -> impl Strategy<Value = Vec<u8>> {
    // Few classes so that overlaps are common.
    prop::collection::vec(prop::sample::select(vec![0u8, 1, 4, 11, 14, 17, 17, 17]), 120)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn matches_definition(pred in labels_strategy(), gt in labels_strategy()) {
        let r = evaluate_labels(&grid(&pred), &grid(&gt)).unwrap();
        let (iou, miou) = oracle(&pred, &gt);
        prop_assert!((r.iou - iou).abs() < 1e-12);
        prop_assert!((r.miou - miou).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&r.iou) && (0.0..=1.0).contains(&r.miou));
        prop_assert_eq!(r.counted_voxels as usize, gt.iter().filter(|&&g| g != 0).count());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn symmetric_without_noise(pred in labels_strategy(), gt in labels_strategy()) {
        let strip = |v: &[u8]| v.iter().map(|&l| if l == 0 { 17 } else { l }).collect::<Vec<_>>();
        let (p, g) = (strip(&pred), strip(&gt));
        let a = evaluate_labels(&grid(&p), &grid(&g)).unwrap();
        let b = evaluate_labels(&grid(&g), &grid(&p)).unwrap();
        prop_assert!((a.iou - b.iou).abs() < 1e-15 && (a.miou - b.miou).abs() < 1e-15);
    }

    #[test]
    fn prediction_under_gt_noise_is_ignored(pred in labels_strategy(), gt in labels_strategy(), relabel in 0u8..=17) {
        let moved: Vec<u8> = pred.iter().zip(&gt).map(|(&p, &g)| if g == 0 { relabel } else { p }).collect();
        let a = evaluate_labels(&grid(&pred), &grid(&gt)).unwrap();
        let b = evaluate_labels(&grid(&moved), &grid(&gt)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn split_counts_merge(pred in labels_strategy(), gt in labels_strategy(), cut in 0usize..120) {
        let whole = accumulate(&grid(&pred), &grid(&gt)).unwrap();
        let keep = |v: &[u8], lo: bool| v.iter().enumerate().map(|(i, &l)| if (i < cut) == lo { l } else { 0 }).collect::<Vec<_>>();
        // Masking with gt noise removes voxels from each half.
        let a = accumulate(&grid(&pred), &grid(&keep(&gt, true))).unwrap();
        let b = accumulate(&grid(&pred), &grid(&keep(&gt, false))).unwrap();
        prop_assert_eq!(a.merge(&b), whole);
    }
}

#[test]
fn evaluate_upsamples_coarse_probabilities() {
    let gt_spec = GridSpec::new([0.0; 3], 1.0, [2, 2, 2]).unwrap();
    let mut car = [0.0; NUM_LABELS];
    car[Label::CAR.index()] = 1.0;
    let coarse = FeatureVolume::constant([1, 1, 1], &car);
    let mut gt = DenseLabelGrid::empty(gt_spec);
    gt.set([0, 0, 0], Label::CAR);
    gt.set([1, 1, 1], Label::NOISE);
    let r = evaluate(&coarse, &gt).unwrap();
    assert_eq!(r.counted_voxels, 7);
    assert!((r.iou - 1.0 / 7.0).abs() < 1e-15);
    assert!((r.per_class_iou[Label::CAR.index() - 1] - 1.0 / 7.0).abs() < 1e-15);
    assert!((r.miou - 1.0 / 7.0 / 16.0).abs() < 1e-15);
    let other = DenseLabelGrid::empty(GridSpec::new([1.0, 0.0, 0.0], 1.0, [2, 2, 2]).unwrap());
    assert!(evaluate_labels(&other, &gt).is_err());
}

#[test]
fn empty_scene_scores_zero() {
    let r = evaluate_labels(&grid(&[17; 120]), &grid(&[17; 120])).unwrap();
    assert_eq!((r.iou, r.miou), (0.0, 0.0));
}

#[test]
fn json_and_table_layout() {
    let mut per_class = [0.0; 16];
    per_class[3] = 0.5;
    let r = EvalResult { iou: 0.25, miou: 0.5 / 16.0, per_class_iou: per_class, counted_voxels: 10 };
    let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(json["iou"], 0.25);
    let pc = json["per_class"].as_object().unwrap();
    assert_eq!(pc.len(), 16);
    assert_eq!(pc[Label::CAR.name()], 0.5);
    assert!(r.to_json().contains("\"miou\":0.0312"));
    let table = report_table(&[("base".into(), r)]);
    let mut lines = table.lines();
    assert!(lines.next().unwrap().starts_with("method"));
    let row: Vec<&str> = lines.next().unwrap().split_whitespace().collect();
    assert_eq!(row[..4], ["base", "25.0", "3.1", "0.0"]);
    assert_eq!(row.len(), 19);
}
