use std::path::Path;
use std::process::Command;

use occ_core::grid::GridSpec;
use occ_service::cli::{bench_rows, run};
use occ_service::occ1;
use occ_service::store::{FrameStatus, FrameStore};

fn occ(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(std::iter::once("occ").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn usage_errors_exit_2() {
    for args in [&[][..], &["nope"], &["eval"], &["eval", "--pred", "a"], &["refine", "--scene", "s", "--out", "o", "--eta", "x"], &["predict", "--modality", "radar", "--scene", "s", "--out", "o"]] {
        let (code, out, err) = occ(args);
        assert_eq!(code, 2, "{args:?}");
        assert!(out.is_empty());
        assert!(err.contains("Usage"), "{args:?}: {err}");
    }
    let (code, out, _) = occ(&["--help"]);
    assert_eq!(code, 0);
    for sub in ["gen", "superimpose", "augment", "predict", "refine", "eval", "bench", "serve"] {
        assert!(out.contains(sub), "{sub}");
    }
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_occ");
    let o = Command::new(bin).arg("frobnicate").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    let o = Command::new(bin).args(["eval", "--pred", "/nonexistent.occ1", "--gt", "/nonexistent.occ1"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = Command::new(bin).args(["bench", "--stride", "4"]).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn pipeline_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = occ(&["eval", "--pred", &p(dir.path(), "a"), "--gt", &p(dir.path(), "b")]);
    assert_eq!(code, 1);
    assert!(err.starts_with("error:"));
    std::fs::write(dir.path().join("bad.occ1"), b"OCCX").unwrap();
    let (code, _, err) = occ(&["eval", "--pred", &p(dir.path(), "bad.occ1"), "--gt", &p(dir.path(), "bad.occ1")]);
    assert_eq!(code, 1);
    assert!(err.contains("bad magic"));
    std::fs::write(dir.path().join("cfg.json"), br#"{"object_count": 2, "frame_count": 0}"#).unwrap();
    assert_eq!(occ(&["gen", "--config", &p(dir.path(), "cfg.json"), "--out", &p(dir.path(), "g")]).0, 1);
    std::fs::write(dir.path().join("cfg.json"), br#"{"objects": 2}"#).unwrap();
    assert_eq!(occ(&["gen", "--config", &p(dir.path(), "cfg.json"), "--out", &p(dir.path(), "g")]).0, 1);
    assert_eq!(occ(&["bench", "--stride", "3"]).0, 1);
}

#[test]
fn bench_reports_decoder_ratio() {
    let (code, out, _) = occ(&["bench", "--stride", "2", "--stride", "4"]);
    assert_eq!(code, 0);
    assert!(out.contains("decoder FLOP ratio S=2/S=4: 8.00"), "{out}");
    let (code, out, _) = occ(&["bench", "--stride", "4", "--json"]);
    assert_eq!(code, 0);
    let rows: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 2);
    let rows = bench_rows(&[2, 4], occ_core::net::Modality::Multimodal, 4, 0.015).unwrap();
    assert_eq!(rows[0].decode_gflops / rows[2].decode_gflops, 8.0);
    assert!(rows.iter().all(|r| (r.total_gflops - r.encode_gflops - r.decode_gflops - r.refine_gflops).abs() < 1e-9));
}

#[test]
fn gen_superimpose_eval() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("cfg.json"), br#"{"object_count": 3, "frame_count": 3}"#).unwrap();
    let (code, out, err) = occ(&["gen", "--seed", "9", "--config", &p(d, "cfg.json"), "--out", &p(d, "s")]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("frames=3 objects=3 gt_frame=1"), "{out}");
    let gt = occ1::read_file(&d.join("s/gt.occ1")).unwrap();
    assert_eq!(*gt.spec(), GridSpec::standard());

    let (code, out, _) = occ(&["eval", "--pred", &p(d, "s/gt.occ1"), "--gt", &p(d, "s/gt.occ1")]);
    assert_eq!(code, 0);
    assert!(out.starts_with("iou=1.0000 "), "{out}");
    let (_, out, _) = occ(&["eval", "--pred", &p(d, "s/gt.occ1"), "--gt", &p(d, "s/gt.occ1"), "--json"]);
    assert!(out.starts_with("{\"iou\":1.0000,"), "{out}");

    let scene = p(d, "s/scene.json");
    let (code, out, _) = occ(&["superimpose", "--scene", &scene, "--window", "0", "--out", &p(d, "one.occ1")]);
    assert_eq!(code, 0);
    assert!(out.starts_with("frames=1..=1 target=1"), "{out}");
    let (_, out, _) = occ(&["superimpose", "--scene", &scene, "--lidar-channels", "8", "--out", &p(d, "all.occ1")]);
    assert!(out.starts_with("frames=0..=2 target=1"), "{out}");
    assert_eq!(occ(&["superimpose", "--scene", &scene, "--frame", "3", "--out", &p(d, "x.occ1")]).0, 1);
}

#[test]
fn predict_augment_register_refine() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(occ(&["gen", "--seed", "4", "--out", &p(d, "s")]).0, 0);
    let scene = p(d, "s/scene.json");
    assert_eq!(occ(&["superimpose", "--scene", &scene, "--lidar-channels", "8", "--out", &p(d, "init.occ1")]).0, 0);
    assert_eq!(occ(&["predict", "--scene", &scene, "--modality", "lidar", "--out", &p(d, "pseudo.occ1")]).0, 0);
    let pseudo = occ1::read_file(&d.join("pseudo.occ1")).unwrap();
    assert!(pseudo.records().iter().all(|r| !r.label.is_noise()));

    let store_dir = p(d, "store");
    let (code, out, err) = occ(&[
        "augment", "--init", &p(d, "init.occ1"), "--pseudo", &p(d, "pseudo.occ1"), "--out", &p(d, "aug.occ1"),
        "--register", "f4", "--scene", &scene, "--data-dir", &store_dir,
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("ratio="));
    let store = FrameStore::open(&store_dir).unwrap();
    let rec = store.record("f4").unwrap();
    assert_eq!((rec.status, rec.frame_index, rec.has_scene), (FrameStatus::Augmented, 2, true));
    assert_eq!(store.current("f4").unwrap(), occ1::read_file(&d.join("aug.occ1")).unwrap());
    // Registering the same id twice is a conflict.
    let again = occ(&["augment", "--init", &p(d, "init.occ1"), "--pseudo", &p(d, "pseudo.occ1"), "--out", &p(d, "aug.occ1"), "--register", "f4", "--data-dir", &store_dir]);
    assert_eq!(again.0, 1);

    let (code, out, err) = occ(&["refine", "--scene", &scene, "--stride", "4", "--eta", "4", "--out", &p(d, "fine.occ1")]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("fine=[40, 512, 512]"), "{out}");
    let fine = occ1::read_file(&d.join("fine.occ1")).unwrap();
    assert_eq!(fine.spec().dims, [40, 512, 512]);
    let (code, out, _) = occ(&["eval", "--pred", &p(d, "fine.occ1"), "--gt", &p(d, "s/gt.occ1")]);
    assert_eq!(code, 0);
    assert!(out.starts_with("iou="));
    assert_eq!(occ(&["refine", "--scene", &scene, "--stride", "4", "--eta", "0", "--out", &p(d, "bad.occ1")]).0, 1);
}
