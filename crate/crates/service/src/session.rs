//! Append-only JSONL session log.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use empath_core::labels::{Emotion, Language};
use serde::{Deserialize, Serialize};

use crate::pipeline::Distribution;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    /// UTC milliseconds since the Unix epoch.
    pub timestamp_ms: u64,
    pub language: Language,
    pub input_duration_s: f64,
    pub top_emotion: Emotion,
    pub probabilities: Distribution,
    pub recommendation_ids: Vec<String>,
}

pub struct SessionLog {
    path: PathBuf,
    file: Mutex<File>,
}

impl SessionLog {
    /// Opens `path` for appending, creating it (and its directory) if needed.
    pub fn open(path: &Path) -> std::io::Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            path: path.to_path_buf(),
            file: Mutex::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Writes the record as one line with a single `write_all` under the
    /// lock, then flushes.
    pub fn append(&self, record: &SessionRecord) -> std::io::Result<()> {
        let mut line = serde_json::to_vec(record).map_err(std::io::Error::other)?;
        line.push(b'\n');
        let mut file = self.file.lock().unwrap_or_else(|e| e.into_inner());
        file.write_all(&line)?;
        file.flush()?;
        file.sync_data()
    }
}
