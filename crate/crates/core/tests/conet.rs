use occ_core::conet::{
    extract_occupied, fuse_fine, refine, refine_from, sample_geometric, sample_semantic, scatter_volume, split_voxels, FineFusionConfig, QueryFeatures,
};
use occ_core::geometry::CameraModel;
use occ_core::grid::GridSpec;
use occ_core::labels::{Label, NUM_LABELS};
use occ_core::net::{baseline_forward, BaselineOutput, EncoderConfig, HeadConfig, LinearMap, Modality};
use occ_core::synth::{capture_frame, generate_scene, SceneConfig};
use occ_core::volume::{FeatureVolume, ImageFeatureMap};
use occ_core::Error;
use proptest::prelude::*;

fn coarse() -> GridSpec {
    GridSpec::new([0.0; 3], 1.0, [3, 4, 5]).unwrap()
}

fn onehot_volume(dims: [usize; 3], labels: &[Label]) -> FeatureVolume {
    let data = labels
        .iter()
        .flat_map(|l| {
            let mut p = [0.0; NUM_LABELS];
            p[l.index()] = 1.0;
            p
        })
        .collect();
    FeatureVolume::from_data(dims, NUM_LABELS, data).unwrap()
}

#[test]
fn occupied_examples() {
    let mut labels = vec![Label::EMPTY; 60];
    labels[0] = Label::CAR;
    labels[59] = Label::NOISE;
    let occ = extract_occupied(&onehot_volume([3, 4, 5], &labels));
    assert_eq!(occ, vec![[0, 0, 0], [2, 3, 4]]);
    assert!(extract_occupied(&onehot_volume([3, 4, 5], &[Label::EMPTY; 60])).is_empty());
}

#[test]
fn split_errors() {
    assert!(matches!(split_voxels(&[[0, 0, 0]], 0, &coarse()), Err(Error::InvalidConfig(_))));
    assert!(matches!(split_voxels(&[[3, 0, 0]], 2, &coarse()), Err(Error::OutOfBounds { .. })));
    assert!(matches!(split_voxels(&[[1, 1, 1], [1, 1, 1]], 2, &coarse()), Err(Error::DuplicateQuery(_))));
    let qs = split_voxels(&[[2, 3, 4]], 3, &coarse()).unwrap();
    assert_eq!(qs.fine_spec().dims, [9, 12, 15]);
    assert_eq!(qs.len(), 27);
    assert!(qs.fine_index.iter().all(|&f| qs.fine_spec().unravel(f).iter().zip([2, 3, 4]).all(|(&i, p)| i / 3 == p)));
}

#[test]
fn semantic_samples_average_views() {
    let cam = CameraModel::looking_along(0.0, [0.0; 3], 3, 3, 1.0);
    let mut a = ImageFeatureMap::zeros(3, 3, 2);
    let mut b = ImageFeatureMap::zeros(3, 3, 2);
    for v in 0..3 {
        for u in 0..3 {
            a.pixel_mut(u, v).copy_from_slice(&[1.0, 2.0]);
            b.pixel_mut(u, v).copy_from_slice(&[3.0, 0.0]);
        }
    }
    // Grid around the camera axis: fine voxel centers near x = 5 are in view.
    let spec = GridSpec::new([4.0, -1.0, -1.0], 2.0, [1, 1, 1]).unwrap();
    let qs = split_voxels(&[[0, 0, 0]], 1, &spec).unwrap();
    assert_eq!(qs.world(0), [5.0, 0.0, 0.0]);
    let one = sample_semantic(&qs, std::slice::from_ref(&a), std::slice::from_ref(&cam)).unwrap();
    assert_eq!(one.row(0), &[1.0, 2.0]);
    let two = sample_semantic(&qs, &[a.clone(), b], &[cam.clone(), cam]).unwrap();
    assert_eq!(two.row(0), &[2.0, 1.0]);
    let behind = CameraModel::looking_along(std::f64::consts::PI, [0.0; 3], 3, 3, 1.0);
    assert_eq!(sample_semantic(&qs, &[a], &[behind]).unwrap().row(0), &[0.0, 0.0]);
    assert_eq!(sample_semantic(&qs, &[], &[]).unwrap().row(0).len(), 18);
}

fn tent(t: f64) -> f64 {
    (1.0 - t.abs()).max(0.0)
}

/// Trilinear sampling written as a sum of tent weights over all voxels;
/// zero outside `[0, n - 1]` on any axis.
fn tent_sample(vol: &FeatureVolume, c: [f64; 3]) -> Vec<f64> {
    let [d, h, w] = vol.dims();
    let mut out = vec![0.0; vol.channels()];
    if c.iter().zip([d, h, w]).any(|(&v, n)| v < 0.0 || v > (n - 1) as f64) {
        return out;
    }
    for z in 0..d {
        for y in 0..h {
            for x in 0..w {
                let k = tent(c[0] - z as f64) * tent(c[1] - y as f64) * tent(c[2] - x as f64);
                if k != 0.0 {
                    for (o, v) in out.iter_mut().zip(vol.voxel([z, y, x])) {
                        *o += k * v;
                    }
                }
            }
        }
    }
    out
}

fn random_map(rng: &mut occ_core::synth::SplitMix64, input: usize, output: usize) -> LinearMap {
    LinearMap {
        input,
        output,
        weights: (0..output).map(|_| (0..input).map(|_| rng.uniform(-1.0, 1.0)).collect()).collect(),
        bias: (0..output).map(|_| rng.uniform(-1.0, 1.0)).collect(),
    }
}

fn matvec(m: &LinearMap, x: &[f64]) -> Vec<f64> {
    (0..m.output).map(|i| m.bias[i] + (0..m.input).map(|j| m.weights[i][j] * x[j]).sum::<f64>()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn occupied_matches_scan(values in prop::collection::vec(0.0f64..1.0, 60 * NUM_LABELS)) {
        let vol = FeatureVolume::from_data([3, 4, 5], NUM_LABELS, values.clone()).unwrap();
        let mut want = vec![];
        for (i, p) in values.chunks(NUM_LABELS).enumerate() {
            let mut best = 0;
            for k in 1..NUM_LABELS {
                if p[k] > p[best] {
                    best = k;
                }
            }
            if best != Label::EMPTY.index() {
                want.push([i / 20, i / 5 % 4, i % 5]);
            }
        }
        prop_assert_eq!(extract_occupied(&vol), want);
    }

    #[test]
    fn geometric_matches_tent_oracle(values in prop::collection::vec(-1.0f64..1.0, 60 * 4), picks in prop::collection::vec(0usize..60, 1..6), eta in 1usize..5) {
        let vol = FeatureVolume::from_data([3, 4, 5], 4, values).unwrap();
        let mut occ: Vec<[usize; 3]> = picks.iter().map(|&i| [i / 20, i / 5 % 4, i % 5]).collect();
        occ.sort();
        occ.dedup();
        let qs = split_voxels(&occ, eta, &coarse()).unwrap();
        let fg = sample_geometric(&qs, &vol).unwrap();
        for q in 0..qs.len() {
            // Fine center in coarse-center coordinates.
            let c = qs.queries[q].map(|v| v + 0.5 / eta as f64 - 0.5);
            let want = tent_sample(&vol, c);
            prop_assert!(fg.row(q).iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-12));
        }
    }

    #[test]
    fn fine_logits_match_matmul(seed in any::<u64>(), n in 1usize..20) {
        let mut rng = occ_core::synth::SplitMix64::new(seed);
        let cfg = FineFusionConfig {
            semantic: random_map(&mut rng, 18, 7),
            geometric: random_map(&mut rng, 16, 7),
            output: random_map(&mut rng, 7, NUM_LABELS),
            provenance: None,
        };
        let fs = QueryFeatures { channels: 18, data: (0..n * 18).map(|_| rng.uniform(0.0, 1.0)).collect() };
        let fg = QueryFeatures { channels: 16, data: (0..n * 16).map(|_| rng.uniform(0.0, 1.0)).collect() };
        let probs = fuse_fine(&fs, &fg, &cfg).unwrap();
        for q in 0..n {
            let hidden: Vec<f64> = matvec(&cfg.semantic, fs.row(q)).iter().zip(matvec(&cfg.geometric, fg.row(q))).map(|(a, b)| a + b).collect();
            let logits = matvec(&cfg.output, &hidden);
            let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = logits.iter().map(|l| (l - m).exp()).sum();
            for k in 0..NUM_LABELS {
                prop_assert!((probs.row(q)[k] - (logits[k] - m).exp() / z).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fine_logits_are_additive_over_branches(seed in any::<u64>()) {
        let mut rng = occ_core::synth::SplitMix64::new(seed);
        let mut cfg = FineFusionConfig {
            semantic: random_map(&mut rng, 18, 18),
            geometric: random_map(&mut rng, 16, 18),
            output: random_map(&mut rng, 18, NUM_LABELS),
            provenance: None,
        };
        for m in [&mut cfg.semantic, &mut cfg.geometric, &mut cfg.output] {
            m.bias.iter_mut().for_each(|b| *b = 0.0);
        }
        let fs = QueryFeatures { channels: 18, data: (0..18).map(|_| rng.uniform(0.0, 1.0)).collect() };
        let fg = QueryFeatures { channels: 16, data: (0..16).map(|_| rng.uniform(0.0, 1.0)).collect() };
        let zs = QueryFeatures::zeros(1, 18);
        let zg = QueryFeatures::zeros(1, 16);
        // Log-odds against class 0 are linear in the inputs.
        let odds = |p: &QueryFeatures| (0..NUM_LABELS).map(|k| (p.row(0)[k] / p.row(0)[0]).ln()).collect::<Vec<_>>();
        let both = odds(&fuse_fine(&fs, &fg, &cfg).unwrap());
        let sem = odds(&fuse_fine(&fs, &zg, &cfg).unwrap());
        let geo = odds(&fuse_fine(&zs, &fg, &cfg).unwrap());
        for k in 0..NUM_LABELS {
            prop_assert!((both[k] - sem[k] - geo[k]).abs() < 1e-9);
        }
    }
}

#[test]
fn scatter_checks_shape() {
    let qs = split_voxels(&[[0, 0, 0]], 2, &coarse()).unwrap();
    assert!(scatter_volume(QueryFeatures::zeros(7, NUM_LABELS), qs.clone()).is_err());
    assert!(scatter_volume(QueryFeatures::zeros(8, 4), qs).is_err());
}

#[test]
fn all_empty_coarse_refines_to_empty() {
    let scene = generate_scene(3, &SceneConfig::default()).unwrap();
    let frame = capture_frame(&scene, 0).unwrap();
    let spec = GridSpec::standard();
    let cfg = EncoderConfig::default();
    let cs = cfg.coarse_spec(&spec);
    let coarse = BaselineOutput {
        modality: Modality::Multimodal,
        coarse_spec: cs,
        features: FeatureVolume::zeros(cs.dims, 16),
        probs: onehot_volume(cs.dims, &vec![Label::EMPTY; cs.num_voxels()]),
    };
    let fine = refine_from(&coarse, &frame, &FineFusionConfig::shipped(Modality::Multimodal, 4).unwrap(), 4).unwrap();
    assert!(fine.queries.is_empty());
    assert_eq!(fine.labels.spec().dims, [40, 512, 512]);
    assert_eq!(fine.labels.occupied_count(), 0);
}

#[test]
fn refine_standard_grid() {
    let scene = generate_scene(12, &SceneConfig::default()).unwrap();
    let frame = capture_frame(&scene, scene.frame_count / 2).unwrap();
    let spec = GridSpec::standard();
    let cfg = EncoderConfig::default();
    for modality in [Modality::Multimodal, Modality::Lidar] {
        let head = HeadConfig::shipped(modality, 4).unwrap();
        let fine_cfg = FineFusionConfig::shipped(modality, 4).unwrap();
        let out = refine(&frame, modality, &spec, &cfg, &head, &fine_cfg, 4).unwrap();
        let occupied = extract_occupied(&out.coarse.probs);
        assert!(!occupied.is_empty());
        assert_eq!(out.fine.labels.spec().dims, [40, 512, 512]);
        assert_eq!(out.fine.queries.len(), occupied.len() * 64);
        // Fine occupancy stays inside the coarse support.
        let coarse_occ: std::collections::HashSet<_> = occupied.into_iter().collect();
        for r in out.fine.labels.to_sparse().records() {
            assert!(coarse_occ.contains(&[r.z as usize / 4, r.y as usize / 4, r.x as usize / 4]));
        }
        assert!(out.fine.query_probs.data.chunks(NUM_LABELS).all(|p| (p.iter().sum::<f64>() - 1.0).abs() < 1e-9));
        let q = 0;
        let idx = out.fine.labels.spec().unravel(out.fine.queries.fine_index[q]);
        assert_eq!(&out.fine.probability_at(idx)[..], out.fine.query_probs.row(q));
    }
}

#[test]
fn eta_one_keeps_coarse_grid() {
    let scene = generate_scene(12, &SceneConfig::default()).unwrap();
    let frame = capture_frame(&scene, 0).unwrap();
    let spec = GridSpec::standard();
    let cfg = EncoderConfig::default();
    let head = HeadConfig::shipped(Modality::Camera, 4).unwrap();
    let coarse = baseline_forward(&frame, Modality::Camera, &spec, &cfg, &head).unwrap();
    let fine = refine_from(&coarse, &frame, &FineFusionConfig::shipped(Modality::Camera, 4).unwrap(), 1).unwrap();
    assert_eq!(fine.labels.spec().dims, coarse.coarse_spec.dims);
    assert_eq!(fine.queries.len(), extract_occupied(&coarse.probs).len());
    assert_eq!(fine.labels.spec().voxel_size, coarse.coarse_spec.voxel_size);
}
