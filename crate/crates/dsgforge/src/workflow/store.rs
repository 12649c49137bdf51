//! On-disk evidence for one run: numbered snapshot documents with metadata
//! sidecars, the run record, and the raw agent exchange log.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::dsg;
use crate::llm::CallLogEntry;

use super::{RunRecord, Snapshot};

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("could not write {path}: {message}")]
    Write { path: String, message: String },
    #[error("could not create run directory {path}: {message}")]
    Create { path: String, message: String },
}

/// Writer for one run directory. The layout is fixed:
/// `snapshot_{NNN}.dsg.json` (canonical document, present only when the
/// snapshot carries a state) + `snapshot_{NNN}.meta.json` per transition,
/// plus `run_record.json` and `agent_io_log.jsonl`.
#[derive(Debug)]
pub struct RunStore {
    dir: PathBuf,
}

/// The sidecar keeps bookkeeping out of the design document so snapshot
/// payloads stay byte-comparable across runs.
#[derive(Serialize)]
struct SnapshotMeta<'a> {
    timestamp: f64,
    stage: &'a str,
    transition_count: u32,
    has_design_state: bool,
}

impl RunStore {
    pub fn create(dir: impl Into<PathBuf>) -> Result<Self, StorageError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| StorageError::Create {
            path: dir.display().to_string(),
            message: e.to_string(),
        })?;
        Ok(RunStore { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write_snapshot(&self, snapshot: &Snapshot) -> Result<(), StorageError> {
        let stem = format!("snapshot_{:03}", snapshot.transition_count);
        let meta = SnapshotMeta {
            timestamp: snapshot.timestamp,
            stage: snapshot.stage.name(),
            transition_count: snapshot.transition_count,
            has_design_state: snapshot.design_state.is_some(),
        };
        let meta_text = serde_json::to_string_pretty(&meta).expect("meta serializes") + "\n";
        self.write_file(&format!("{stem}.meta.json"), meta_text.as_bytes())?;
        if let Some(state) = &snapshot.design_state {
            let doc = dsg::serialize_design_state(state);
            self.write_file(&format!("{stem}.dsg.json"), doc.as_bytes())?;
        }
        Ok(())
    }

    pub fn write_record(&self, record: &RunRecord) -> Result<(), StorageError> {
        let text = serde_json::to_string_pretty(record).expect("record serializes") + "\n";
        self.write_file("run_record.json", text.as_bytes())
    }

    pub fn write_log(&self, log: &[CallLogEntry]) -> Result<(), StorageError> {
        let mut out = String::new();
        for entry in log {
            out.push_str(&serde_json::to_string(entry).expect("log entry serializes"));
            out.push('\n');
        }
        self.write_file("agent_io_log.jsonl", out.as_bytes())
    }

    fn write_file(&self, name: &str, bytes: &[u8]) -> Result<(), StorageError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| StorageError::Write {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workflow::Stage;

    #[test]
    fn snapshots_without_state_write_only_metadata() {
        let dir = tempfile::tempdir().unwrap();
        let store = RunStore::create(dir.path().join("run")).unwrap();
        let snapshot = Snapshot {
            timestamp: 0.0,
            stage: Stage::Supervisor,
            design_state: None,
            transition_count: 1,
        };
        store.write_snapshot(&snapshot).unwrap();
        assert!(store.dir().join("snapshot_001.meta.json").exists());
        assert!(!store.dir().join("snapshot_001.dsg.json").exists());
    }

    #[test]
    fn snapshot_documents_are_canonical() {
        let dir = tempfile::tempdir().unwrap();
        let store = RunStore::create(dir.path()).unwrap();
        let doc =
            r#"{"nodes": {"11111111-1111-4111-8111-111111111111": {"name": "n"}}, "edges": []}"#;
        let state = dsg::parse_design_state(doc).unwrap();
        let snapshot = Snapshot {
            timestamp: 1.0,
            stage: Stage::Done,
            design_state: Some(state.clone()),
            transition_count: 2,
        };
        store.write_snapshot(&snapshot).unwrap();
        let written = std::fs::read_to_string(store.dir().join("snapshot_002.dsg.json")).unwrap();
        assert_eq!(written, dsg::serialize_design_state(&state));
    }

    #[test]
    fn blocked_writes_surface_as_storage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let store = RunStore::create(dir.path()).unwrap();
        // A directory squatting on the target path defeats fs::write even
        // for privileged users, unlike permission bits.
        std::fs::create_dir(dir.path().join("snapshot_001.meta.json")).unwrap();
        let snapshot = Snapshot {
            timestamp: 0.0,
            stage: Stage::Supervisor,
            design_state: None,
            transition_count: 1,
        };
        assert!(matches!(
            store.write_snapshot(&snapshot),
            Err(StorageError::Write { .. })
        ));
    }
}
