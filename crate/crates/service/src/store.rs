//! On-disk frame store rooted at `OCC_DATA_DIR`.
//!
//! ```text
//! <root>/<frame id>/frame.json     status, frame index, acknowledged batches
//!                   scene.json     optional, enables the views endpoint
//!                   v_init.occ1 v_pseudo.occ1 v_aug.occ1 v_final.occ1
//!                   journal.jsonl  append-only edits
//! ```

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use occ_core::aap::{self, Edit, EditJournal};
use occ_core::grid::{DenseLabelGrid, SparseOccupancy};
use occ_core::synth::{capture_frame, FrameSensorData, Scene};
use serde::{Deserialize, Serialize};

use crate::occ1::{self, Occ1Error};

pub const DATA_DIR_ENV: &str = "OCC_DATA_DIR";
const META: &str = "frame.json";
const SCENE: &str = "scene.json";
const JOURNAL: &str = "journal.jsonl";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameStatus {
    Raw,
    Augmented,
    InReview,
    Finalized,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Artifact {
    Init,
    Pseudo,
    Aug,
    Final,
}

impl Artifact {
    pub fn file_name(self) -> &'static str {
        match self {
            Artifact::Init => "v_init.occ1",
            Artifact::Pseudo => "v_pseudo.occ1",
            Artifact::Aug => "v_aug.occ1",
            Artifact::Final => "v_final.occ1",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchAck {
    pub batch_id: String,
    pub journal_length: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub id: String,
    pub status: FrameStatus,
    pub frame_index: usize,
    pub has_scene: bool,
    /// Occupied voxels of the most refined artifact present.
    pub occupied_count: usize,
    pub journal_length: usize,
    #[serde(default)]
    pub batches: Vec<BatchAck>,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("unknown frame {0}")]
    NotFound(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("out of bounds: {0}")]
    OutOfBounds(String),
    #[error("invalid frame id {0:?}")]
    InvalidId(String),
    #[error(transparent)]
    Occ1(#[from] Occ1Error),
    #[error(transparent)]
    Core(#[from] occ_core::Error),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for StoreError {
    fn from(e: std::io::Error) -> Self {
        StoreError::Io(e.to_string())
    }
}

pub type StoreResult<T> = Result<T, StoreError>;

/// Outcome of an edit submission.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditAck {
    pub journal_length: usize,
    pub accepted: usize,
    /// True when the batch id was already acknowledged and nothing was appended.
    pub duplicate: bool,
}

pub struct FrameStore {
    root: PathBuf,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_' || b == b'.') && id != "." && id != ".."
}

fn write_atomic(path: &Path, bytes: &[u8]) -> StoreResult<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

impl FrameStore {
    pub fn open(root: impl Into<PathBuf>) -> StoreResult<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(FrameStore { root, locks: Mutex::new(HashMap::new()) })
    }

    /// Opens `$OCC_DATA_DIR`, defaulting to `./occ-data`.
    pub fn from_env() -> StoreResult<Self> {
        FrameStore::open(std::env::var_os(DATA_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("occ-data")))
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn dir(&self, id: &str) -> StoreResult<PathBuf> {
        if !valid_id(id) {
            return Err(StoreError::InvalidId(id.into()));
        }
        Ok(self.root.join(id))
    }

    fn existing(&self, id: &str) -> StoreResult<PathBuf> {
        let dir = self.dir(id)?;
        if !dir.join(META).is_file() {
            return Err(StoreError::NotFound(id.into()));
        }
        Ok(dir)
    }

    /// Writers to one frame run one at a time.
    fn lock(&self, id: &str) -> Arc<Mutex<()>> {
        self.locks.lock().unwrap().entry(id.to_string()).or_default().clone()
    }

    fn save_record(&self, rec: &FrameRecord) -> StoreResult<()> {
        let dir = self.dir(&rec.id)?;
        write_atomic(&dir.join(META), serde_json::to_string_pretty(rec).expect("record serializes").as_bytes())
    }

    pub fn record(&self, id: &str) -> StoreResult<FrameRecord> {
        let dir = self.existing(id)?;
        let text = fs::read_to_string(dir.join(META))?;
        serde_json::from_str(&text).map_err(|e| StoreError::Io(format!("{id}/{META}: {e}")))
    }

    pub fn list(&self) -> StoreResult<Vec<FrameRecord>> {
        let mut ids: Vec<String> = fs::read_dir(&self.root)?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().join(META).is_file())
            .filter_map(|e| e.file_name().into_string().ok())
            .collect();
        ids.sort();
        ids.iter().map(|id| self.record(id)).collect()
    }

    /// Registers a frame with its initial annotation; status `raw`.
    pub fn create(&self, id: &str, scene: Option<&Scene>, frame_index: usize, v_init: &SparseOccupancy) -> StoreResult<FrameRecord> {
        let dir = self.dir(id)?;
        let lock = self.lock(id);
        let _guard = lock.lock().unwrap();
        if dir.join(META).exists() {
            return Err(StoreError::Conflict(format!("frame {id} already exists")));
        }
        if let Some(scene) = scene {
            if frame_index >= scene.frame_count {
                return Err(occ_core::Error::FrameOutOfRange(frame_index).into());
            }
        }
        fs::create_dir_all(&dir)?;
        if let Some(scene) = scene {
            write_atomic(&dir.join(SCENE), scene.to_canonical_json().as_bytes())?;
        }
        occ1::write_file(&dir.join(Artifact::Init.file_name()), v_init)?;
        fs::write(dir.join(JOURNAL), b"")?;
        let rec = FrameRecord {
            id: id.into(),
            status: FrameStatus::Raw,
            frame_index,
            has_scene: scene.is_some(),
            occupied_count: v_init.len(),
            journal_length: 0,
            batches: vec![],
        };
        self.save_record(&rec)?;
        Ok(rec)
    }

    /// Fills the empty voxels of `v_init` from `v_pseudo`; status `augmented`.
    pub fn augment(&self, id: &str, v_pseudo: &SparseOccupancy) -> StoreResult<FrameRecord> {
        let dir = self.existing(id)?;
        let lock = self.lock(id);
        let _guard = lock.lock().unwrap();
        let mut rec = self.record(id)?;
        if rec.status != FrameStatus::Raw {
            return Err(StoreError::Conflict(format!("frame {id} is already {:?}", rec.status)));
        }
        let v_init = DenseLabelGrid::from_sparse(&occ1::read_file(&dir.join(Artifact::Init.file_name()))?);
        let v_aug = aap::augment(&v_init, &DenseLabelGrid::from_sparse(v_pseudo))?.to_sparse();
        occ1::write_file(&dir.join(Artifact::Pseudo.file_name()), v_pseudo)?;
        occ1::write_file(&dir.join(Artifact::Aug.file_name()), &v_aug)?;
        rec.status = FrameStatus::Augmented;
        rec.occupied_count = v_aug.len();
        self.save_record(&rec)?;
        Ok(rec)
    }

    pub fn grid(&self, id: &str, artifact: Artifact) -> StoreResult<SparseOccupancy> {
        let path = self.existing(id)?.join(artifact.file_name());
        if !path.is_file() {
            return Err(StoreError::Conflict(format!("frame {id} has no {}", artifact.file_name())));
        }
        Ok(occ1::read_file(&path)?)
    }

    /// The latest annotation: `v_final`, else `v_aug`, else `v_init`.
    pub fn current(&self, id: &str) -> StoreResult<SparseOccupancy> {
        let rec = self.record(id)?;
        let artifact = match rec.status {
            FrameStatus::Raw => Artifact::Init,
            FrameStatus::Augmented | FrameStatus::InReview => Artifact::Aug,
            FrameStatus::Finalized => Artifact::Final,
        };
        self.grid(id, artifact)
    }

    pub fn journal(&self, id: &str) -> StoreResult<EditJournal> {
        let dir = self.existing(id)?;
        let rec = self.record(id)?;
        let text = fs::read_to_string(dir.join(JOURNAL))?;
        Ok(EditJournal::from_jsonl(rec.frame_index, &text)?)
    }

    /// Appends a batch to the journal. A repeated `batch_id` returns the
    /// length recorded at its first acknowledgment and appends nothing.
    pub fn append_edits(&self, id: &str, batch_id: Option<&str>, edits: &[Edit]) -> StoreResult<EditAck> {
        let dir = self.existing(id)?;
        let lock = self.lock(id);
        let _guard = lock.lock().unwrap();
        let mut rec = self.record(id)?;
        match rec.status {
            FrameStatus::Finalized => return Err(StoreError::Conflict(format!("frame {id} is finalized"))),
            FrameStatus::Raw => return Err(StoreError::Conflict(format!("frame {id} has not been augmented"))),
            FrameStatus::Augmented | FrameStatus::InReview => {}
        }
        if let Some(b) = batch_id {
            if let Some(ack) = rec.batches.iter().find(|a| a.batch_id == b) {
                return Ok(EditAck { journal_length: ack.journal_length, accepted: 0, duplicate: true });
            }
        }
        let spec = *occ1::read_file(&dir.join(Artifact::Aug.file_name()))?.spec();
        let batch = EditJournal { frame_index: rec.frame_index, edits: edits.to_vec() };
        batch.validate(&spec).map_err(|e| StoreError::OutOfBounds(e.to_string()))?;
        let mut file = fs::OpenOptions::new().append(true).open(dir.join(JOURNAL))?;
        file.write_all(batch.to_jsonl().as_bytes())?;
        file.sync_data()?;
        rec.journal_length += edits.len();
        if let Some(b) = batch_id {
            rec.batches.push(BatchAck { batch_id: b.into(), journal_length: rec.journal_length });
        }
        if !edits.is_empty() {
            rec.status = FrameStatus::InReview;
        }
        self.save_record(&rec)?;
        Ok(EditAck { journal_length: rec.journal_length, accepted: edits.len(), duplicate: false })
    }

    /// `v_aug` with the journal replayed.
    pub fn preview(&self, id: &str) -> StoreResult<DenseLabelGrid> {
        self.existing(id)?;
        let lock = self.lock(id);
        let _guard = lock.lock().unwrap();
        self.replay(id)
    }

    fn replay(&self, id: &str) -> StoreResult<DenseLabelGrid> {
        let v_aug = DenseLabelGrid::from_sparse(&self.grid(id, Artifact::Aug)?);
        Ok(aap::apply_edits(&v_aug, &self.journal(id)?)?)
    }

    /// Writes `v_final` and closes the frame to further edits.
    pub fn finalize(&self, id: &str) -> StoreResult<FrameRecord> {
        let dir = self.existing(id)?;
        let lock = self.lock(id);
        let _guard = lock.lock().unwrap();
        let mut rec = self.record(id)?;
        match rec.status {
            FrameStatus::Finalized => return Err(StoreError::Conflict(format!("frame {id} is already finalized"))),
            FrameStatus::Raw => return Err(StoreError::Conflict(format!("frame {id} has not been augmented"))),
            FrameStatus::Augmented | FrameStatus::InReview => {}
        }
        let v_final = self.replay(id)?.to_sparse();
        occ1::write_file(&dir.join(Artifact::Final.file_name()), &v_final)?;
        rec.status = FrameStatus::Finalized;
        rec.occupied_count = v_final.len();
        self.save_record(&rec)?;
        Ok(rec)
    }

    pub fn scene(&self, id: &str) -> StoreResult<Option<Scene>> {
        let path = self.existing(id)?.join(SCENE);
        if !path.is_file() {
            return Ok(None);
        }
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map(Some).map_err(|e| StoreError::Io(format!("{id}/{SCENE}: {e}")))
    }

    /// Sensor data regenerated from the stored scene.
    pub fn sensor_data(&self, id: &str) -> StoreResult<Option<FrameSensorData>> {
        let rec = self.record(id)?;
        match self.scene(id)? {
            Some(scene) => Ok(Some(capture_frame(&scene, rec.frame_index)?)),
            None => Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use occ_core::grid::{GridSpec, SparseRecord};
    use occ_core::labels::Label;

    fn small() -> SparseOccupancy {
        let spec = GridSpec::new([0.0; 3], 1.0, [2, 2, 2]).unwrap();
        SparseOccupancy::new(spec, vec![SparseRecord { z: 0, y: 0, x: 0, label: Label::CAR }]).unwrap()
    }

    #[test]
    fn status_moves_forward_only() {
        let dir = tempfile::tempdir().unwrap();
        let store = FrameStore::open(dir.path()).unwrap();
        store.create("f", None, 0, &small()).unwrap();
        assert!(matches!(store.append_edits("f", None, &[]), Err(StoreError::Conflict(_))));
        let rec = store.augment("f", &small()).unwrap();
        assert_eq!(rec.status, FrameStatus::Augmented);
        assert!(matches!(store.augment("f", &small()), Err(StoreError::Conflict(_))));
        store.finalize("f").unwrap();
        assert!(matches!(store.finalize("f"), Err(StoreError::Conflict(_))));
        assert!(matches!(store.create("f", None, 0, &small()), Err(StoreError::Conflict(_))));
    }

    #[test]
    fn ids_are_checked() {
        let dir = tempfile::tempdir().unwrap();
        let store = FrameStore::open(dir.path()).unwrap();
        assert!(matches!(store.record("../etc"), Err(StoreError::InvalidId(_))));
        assert!(matches!(store.record("missing"), Err(StoreError::NotFound(_))));
    }
}
