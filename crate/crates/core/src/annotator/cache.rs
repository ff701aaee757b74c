//! Append-only JSON-lines response cache keyed by prompt hash.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub hash: String,
    pub model: String,
    pub prompt: String,
    pub raw_response: String,
    pub tokens_in: u64,
    pub tokens_out: u64,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

impl CacheRecord {
    pub fn now(
        hash: String,
        model: String,
        prompt: String,
        raw_response: String,
        tokens_in: u64,
        tokens_out: u64,
    ) -> Self {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        CacheRecord {
            hash,
            model,
            prompt,
            raw_response,
            tokens_in,
            tokens_out,
            timestamp,
        }
    }
}

#[derive(Debug, Default)]
pub struct ResponseCache {
    entries: HashMap<String, CacheRecord>,
    file: Option<(PathBuf, File)>,
}

impl ResponseCache {
    /// In-memory cache with no backing file.
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (creating if needed) a cache file and loads its records.
    /// A later record for the same hash replaces an earlier one.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut entries = HashMap::new();
        if path.exists() {
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            for (idx, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let rec: CacheRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
                    path: path.display().to_string(),
                    line: idx + 1,
                    msg: e.to_string(),
                })?;
                entries.insert(rec.hash.clone(), rec);
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        Ok(ResponseCache {
            entries,
            file: Some((path, file)),
        })
    }

    pub fn get(&self, hash: &str) -> Option<&CacheRecord> {
        self.entries.get(hash)
    }

    pub fn contains(&self, hash: &str) -> bool {
        self.entries.contains_key(hash)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, rec: CacheRecord) -> Result<()> {
        if let Some((path, file)) = &mut self.file {
            let mut line = serde_json::to_string(&rec)?;
            line.push('\n');
            file.write_all(line.as_bytes())
                .and_then(|_| file.flush())
                .map_err(|e| Error::io(path.clone(), e))?;
        }
        self.entries.insert(rec.hash.clone(), rec);
        Ok(())
    }
}
