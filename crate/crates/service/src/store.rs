//! On-disk case store.
//!
//! ```text
//! <data_dir>/
//!   index.jsonl                 one {"case_id", "created_at"} line per case, oldest first
//!   cases/<case_id>/image.png   original upload
//!   cases/<case_id>/record.json canonical case record
//! ```
//!
//! Every file is written to a temporary sibling and renamed into place, so a
//! crash never leaves a half-written record or index behind.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use dermtriage_core::imaging::ImageFormat;
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::record::{CaseRecord, CaseStatus};
use crate::ServiceError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct IndexEntry {
    case_id: Uuid,
    created_at: DateTime<Utc>,
}

#[derive(Debug)]
pub struct CaseStore {
    root: PathBuf,
    index: Mutex<Vec<IndexEntry>>,
}

/// Writes `bytes` to `path` via a temporary file and rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("file");
    let tmp = dir.join(format!(".{name}.{}.tmp", Uuid::new_v4().simple()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result
}

impl CaseStore {
    /// Opens or creates a store under `data_dir`.
    ///
    /// A missing index is rebuilt from the case directories.
    pub fn open(data_dir: &Path) -> Result<Self, ServiceError> {
        std::fs::create_dir_all(data_dir.join("cases"))?;
        let store = Self {
            root: data_dir.to_path_buf(),
            index: Mutex::new(Vec::new()),
        };
        let entries = match std::fs::read_to_string(store.index_path()) {
            Ok(text) => text
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| {
                    serde_json::from_str::<IndexEntry>(l)
                        .map_err(|e| ServiceError::Storage(format!("corrupt index line: {e}")))
                })
                .collect::<Result<Vec<_>, _>>()?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => store.rebuild_index()?,
            Err(e) => return Err(e.into()),
        };
        *store.index.lock().expect("index lock") = entries;
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn index_path(&self) -> PathBuf {
        self.root.join("index.jsonl")
    }

    fn case_dir(&self, id: Uuid) -> PathBuf {
        self.root.join("cases").join(id.to_string())
    }

    fn record_path(&self, id: Uuid) -> PathBuf {
        self.case_dir(id).join("record.json")
    }

    fn rebuild_index(&self) -> Result<Vec<IndexEntry>, ServiceError> {
        let mut entries = Vec::new();
        for dir in std::fs::read_dir(self.root.join("cases"))? {
            let dir = dir?;
            let Some(id) = dir.file_name().to_str().and_then(|n| Uuid::parse_str(n).ok()) else {
                continue;
            };
            if let Some(record) = self.get(id)? {
                entries.push(IndexEntry {
                    case_id: id,
                    created_at: record.created_at,
                });
            }
        }
        entries.sort_by_key(|e| (e.created_at, e.case_id));
        self.write_index(&entries)?;
        Ok(entries)
    }

    fn write_index(&self, entries: &[IndexEntry]) -> Result<(), ServiceError> {
        let mut text = String::new();
        for e in entries {
            text.push_str(&serde_json::to_string(e).map_err(|e| ServiceError::Storage(e.to_string()))?);
            text.push('\n');
        }
        write_atomic(&self.index_path(), text.as_bytes())?;
        Ok(())
    }

    /// Stores the image and the new record, then adds it to the index.
    pub fn create(&self, record: &CaseRecord, image: &[u8]) -> Result<(), ServiceError> {
        let dir = self.case_dir(record.case_id);
        std::fs::create_dir_all(&dir)?;
        write_atomic(&self.root.join(&record.image_ref), image)?;
        self.put(record)?;
        let mut index = self.index.lock().expect("index lock");
        let mut next = index.clone();
        next.push(IndexEntry {
            case_id: record.case_id,
            created_at: record.created_at,
        });
        self.write_index(&next)?;
        *index = next;
        Ok(())
    }

    /// Overwrites the stored record.
    pub fn put(&self, record: &CaseRecord) -> Result<(), ServiceError> {
        let json = serde_json::to_vec_pretty(record).map_err(|e| ServiceError::Storage(e.to_string()))?;
        write_atomic(&self.record_path(record.case_id), &json)?;
        Ok(())
    }

    pub fn get(&self, id: Uuid) -> Result<Option<CaseRecord>, ServiceError> {
        match std::fs::read(self.record_path(id)) {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .map(Some)
                .map_err(|e| ServiceError::Storage(format!("case {id}: corrupt record: {e}"))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    /// Records newest first, optionally filtered by status.
    pub fn list(&self, status: Option<CaseStatus>) -> Result<Vec<CaseRecord>, ServiceError> {
        let ids: Vec<Uuid> = self
            .index
            .lock()
            .expect("index lock")
            .iter()
            .map(|e| e.case_id)
            .collect();
        let mut out = Vec::new();
        for id in ids.into_iter().rev() {
            if let Some(record) = self.get(id)? {
                if status.map_or(true, |s| record.status == s) {
                    out.push(record);
                }
            }
        }
        Ok(out)
    }

    pub fn image_ref(id: Uuid, format: ImageFormat) -> String {
        format!("cases/{id}/image.{}", format.extension())
    }
}
