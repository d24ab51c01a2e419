//! Starts the annotation API on an ephemeral port, registers one augmented
//! frame and drives it through edits, preview and finalize over HTTP.
//!
//! cargo run -p occ-service --example annotation_service

use std::sync::Arc;

use occ_core::grid::{DenseLabelGrid, GridSpec};
use occ_core::labels::Label;
use occ_core::synth::{generate_scene, CameraRigConfig, SceneConfig};
use occ_service::http::router;
use occ_service::store::FrameStore;
use serde_json::{json, Value};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("occ-annotation-{}", std::process::id()));
    let store = Arc::new(FrameStore::open(&dir)?);

    let config = SceneConfig { camera: CameraRigConfig { width: 64, height: 40, ..Default::default() }, ..Default::default() };
    let scene = generate_scene(5, &config)?;
    let spec = GridSpec::new([-4.0, -4.0, -1.0], 0.5, [6, 16, 16])?;
    let mut init = DenseLabelGrid::empty(spec);
    init.set([0, 8, 8], Label::DRIVE_SURFACE);
    let mut pseudo = DenseLabelGrid::empty(spec);
    pseudo.set([1, 4, 4], Label::CAR);
    pseudo.set([0, 8, 8], Label::SIDEWALK);
    store.create("demo", Some(&scene), scene.frame_count / 2, &init.to_sparse())?;
    store.augment("demo", &pseudo.to_sparse())?;

    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let base = format!("http://{}/api", listener.local_addr()?);
    let app = router(store.clone());
    tokio::spawn(async move { axum::serve(listener, app).await });
    let client = reqwest::Client::new();

    let frames: Value = client.get(format!("{base}/frames")).send().await?.json().await?;
    println!("GET /frames -> {frames}");
    let occ: Value = client.get(format!("{base}/frames/demo/occupancy")).send().await?.json().await?;
    println!("occupancy: status {} records {}", occ["status"], occ["records"]);

    let views: Value = client.get(format!("{base}/frames/demo/views")).send().await?.json().await?;
    for v in views["views"].as_array().into_iter().flatten() {
        println!("view {}x{}: semantic png {} b64 chars, depth png {}", v["width"], v["height"], v["semantic_png"].as_str().map_or(0, str::len), v["depth_png"].as_str().map_or(0, str::len));
    }

    let batch = json!({ "batch_id": "b-1", "edits": [
        { "z": 1, "y": 4, "x": 5, "label": Label::CAR.id(), "author": "ana" },
        { "z": 0, "y": 8, "x": 8, "label": Label::DRIVE_SURFACE.id() },
    ]});
    for attempt in 1..=2 {
        let r = client.post(format!("{base}/frames/demo/edits")).json(&batch).send().await?;
        println!("POST edits attempt {attempt}: {} {}", r.status(), r.text().await?);
    }
    let bad = client.post(format!("{base}/frames/demo/edits")).json(&json!([{ "z": 9, "y": 0, "x": 0, "label": 4 }])).send().await?;
    println!("out of bounds edit: {} {}", bad.status(), bad.text().await?);

    let preview: Value = client.get(format!("{base}/frames/demo/preview")).send().await?.json().await?;
    println!("preview: journal {} records {}", preview["journal_length"], preview["records"]);
    let fin = client.post(format!("{base}/frames/demo/finalize")).send().await?;
    println!("finalize: {} {}", fin.status(), fin.text().await?);
    let late = client.post(format!("{base}/frames/demo/edits")).json(&json!([])).send().await?;
    println!("edit after finalize: {}", late.status());

    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
