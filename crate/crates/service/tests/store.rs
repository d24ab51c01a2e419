use occ_core::aap::{apply_edits, augment, Edit};
use occ_core::grid::{DenseLabelGrid, GridSpec, SparseOccupancy};
use occ_core::labels::Label;
use occ_core::synth::{generate_scene, SceneConfig};
use occ_service::store::{Artifact, FrameStatus, FrameStore, StoreError};

fn spec() -> GridSpec {
    GridSpec::new([0.0, 0.0, 0.0], 0.5, [3, 4, 5]).unwrap()
}

fn grids() -> (SparseOccupancy, SparseOccupancy) {
    let mut init = DenseLabelGrid::empty(spec());
    init.set([0, 0, 0], Label::CAR);
    init.set([1, 2, 3], Label::NOISE);
    let mut pseudo = DenseLabelGrid::empty(spec());
    pseudo.set([0, 0, 0], Label::TERRAIN);
    pseudo.set([2, 3, 4], Label::VEGETATION);
    pseudo.set([0, 1, 0], Label::MANMADE);
    (init.to_sparse(), pseudo.to_sparse())
}

fn edit(z: usize, y: usize, x: usize, label: Label) -> Edit {
    Edit { z, y, x, label, author: "a".into(), ts: 1 }
}

fn augmented(store: &FrameStore, id: &str) {
    let (init, pseudo) = grids();
    store.create(id, None, 0, &init).unwrap();
    store.augment(id, &pseudo).unwrap();
}

#[test]
fn lifecycle() {
    let dir = tempfile::tempdir().unwrap();
    let store = FrameStore::open(dir.path()).unwrap();
    let (init, pseudo) = grids();
    let rec = store.create("f1", None, 0, &init).unwrap();
    assert_eq!((rec.status, rec.occupied_count, rec.journal_length), (FrameStatus::Raw, 2, 0));
    assert_eq!(store.current("f1").unwrap(), init);
    assert!(matches!(store.append_edits("f1", None, &[edit(0, 0, 0, Label::CAR)]), Err(StoreError::Conflict(_))));
    assert!(matches!(store.finalize("f1"), Err(StoreError::Conflict(_))));

    let rec = store.augment("f1", &pseudo).unwrap();
    assert_eq!((rec.status, rec.occupied_count), (FrameStatus::Augmented, 4));
    let v_aug = augment(&DenseLabelGrid::from_sparse(&init), &DenseLabelGrid::from_sparse(&pseudo)).unwrap();
    assert_eq!(store.current("f1").unwrap(), v_aug.to_sparse());
    assert_eq!(store.grid("f1", Artifact::Pseudo).unwrap(), pseudo);
    assert!(matches!(store.augment("f1", &pseudo), Err(StoreError::Conflict(_))));

    let ack = store.append_edits("f1", None, &[edit(0, 0, 0, Label::BUS), edit(2, 3, 4, Label::EMPTY)]).unwrap();
    assert_eq!((ack.journal_length, ack.accepted, ack.duplicate), (2, 2, false));
    assert_eq!(store.record("f1").unwrap().status, FrameStatus::InReview);
    let preview = store.preview("f1").unwrap();
    assert_eq!(preview, apply_edits(&v_aug, &store.journal("f1").unwrap()).unwrap());
    assert_eq!(preview.get([0, 0, 0]), Label::BUS);
    assert_eq!(preview.get([2, 3, 4]), Label::EMPTY);

    let rec = store.finalize("f1").unwrap();
    assert_eq!((rec.status, rec.occupied_count), (FrameStatus::Finalized, 3));
    assert_eq!(store.current("f1").unwrap(), preview.to_sparse());
    assert!(matches!(store.append_edits("f1", None, &[edit(0, 0, 0, Label::CAR)]), Err(StoreError::Conflict(_))));
    assert!(matches!(store.finalize("f1"), Err(StoreError::Conflict(_))));
}

#[test]
fn errors() {
    let dir = tempfile::tempdir().unwrap();
    let store = FrameStore::open(dir.path()).unwrap();
    assert!(matches!(store.record("nope"), Err(StoreError::NotFound(_))));
    assert!(matches!(store.record("../x"), Err(StoreError::InvalidId(_))));
    augmented(&store, "f");
    let (init, _) = grids();
    assert!(matches!(store.create("f", None, 0, &init), Err(StoreError::Conflict(_))));
    let bad = [edit(0, 0, 0, Label::CAR), edit(3, 0, 0, Label::CAR)];
    assert!(matches!(store.append_edits("f", None, &bad), Err(StoreError::OutOfBounds(_))));
    assert_eq!(store.record("f").unwrap().journal_length, 0);
    assert_eq!(store.journal("f").unwrap().edits.len(), 0);
    let scene = generate_scene(1, &SceneConfig::default()).unwrap();
    assert!(matches!(store.create("g", Some(&scene), scene.frame_count, &init), Err(StoreError::Core(_))));
}

#[test]
fn batch_ids_are_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let store = FrameStore::open(dir.path()).unwrap();
    augmented(&store, "f");
    let edits = [edit(1, 1, 1, Label::CAR), edit(1, 1, 2, Label::CAR)];
    let first = store.append_edits("f", Some("b1"), &edits).unwrap();
    let again = store.append_edits("f", Some("b1"), &edits).unwrap();
    assert_eq!((first.journal_length, first.duplicate), (2, false));
    assert_eq!((again.journal_length, again.accepted, again.duplicate), (2, 0, true));
    store.append_edits("f", Some("b2"), &edits[..1]).unwrap();
    assert_eq!(store.append_edits("f", Some("b1"), &edits).unwrap().journal_length, 2);
    assert_eq!(store.journal("f").unwrap().edits.len(), 3);
}

#[test]
fn state_survives_reopen() {
    let dir = tempfile::tempdir().unwrap();
    {
        let store = FrameStore::open(dir.path()).unwrap();
        augmented(&store, "a");
        augmented(&store, "b");
        store.append_edits("a", Some("x"), &[edit(0, 3, 4, Label::PEDESTRIAN)]).unwrap();
    }
    let store = FrameStore::open(dir.path()).unwrap();
    let ids: Vec<String> = store.list().unwrap().into_iter().map(|r| r.id).collect();
    assert_eq!(ids, ["a", "b"]);
    assert_eq!(store.journal("a").unwrap().edits, vec![edit(0, 3, 4, Label::PEDESTRIAN)]);
    assert!(store.append_edits("a", Some("x"), &[edit(0, 0, 0, Label::CAR)]).unwrap().duplicate);
    assert_eq!(store.preview("a").unwrap().get([0, 3, 4]), Label::PEDESTRIAN);
}

#[test]
fn concurrent_writers_lose_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let store = FrameStore::open(dir.path()).unwrap();
    augmented(&store, "f");
    std::thread::scope(|s| {
        for t in 0..6 {
            let store = &store;
            s.spawn(move || {
                for i in 0..10 {
                    let n = t * 10 + i;
                    store.append_edits("f", Some(&format!("b{n}")), &[edit(n / 20, (n / 5) % 4, n % 5, Label::BARRIER)]).unwrap();
                    store.preview("f").unwrap();
                }
            });
        }
    });
    let journal = store.journal("f").unwrap();
    assert_eq!(journal.edits.len(), 60);
    assert_eq!(store.record("f").unwrap().journal_length, 60);
    let preview = store.preview("f").unwrap();
    for n in 0..60 {
        assert_eq!(preview.get([n / 20, (n / 5) % 4, n % 5]), Label::BARRIER);
    }
}

#[test]
fn scene_frames_regenerate_sensor_data() {
    let dir = tempfile::tempdir().unwrap();
    let store = FrameStore::open(dir.path()).unwrap();
    let scene = generate_scene(5, &SceneConfig::default()).unwrap();
    let (init, _) = grids();
    store.create("s", Some(&scene), 1, &init).unwrap();
    store.create("n", None, 0, &init).unwrap();
    // The stored scene is its canonical JSON form.
    let stored = store.scene("s").unwrap().unwrap();
    assert_eq!(stored.to_canonical_json(), scene.to_canonical_json());
    let canonical: occ_core::synth::Scene = serde_json::from_str(&scene.to_canonical_json()).unwrap();
    assert_eq!(stored, canonical);
    let data = store.sensor_data("s").unwrap().unwrap();
    assert_eq!(data.frame_index, 1);
    assert_eq!(data, occ_core::synth::capture_frame(&canonical, 1).unwrap());
    assert!(store.sensor_data("n").unwrap().is_none());
}
