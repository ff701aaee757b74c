//! On-disk artifacts: schema-stamped JSON and CSV, the stage manifest and the
//! output-directory lock.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const LOCK_FILE: &str = ".lock";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path).map_err(|e| Error::io(path, e))?))
}

/// A JSON document wrapped with its schema version and config hash.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stamped<T> {
    pub schema_version: u32,
    pub config_hash: String,
    #[serde(flatten)]
    pub body: T,
}

pub fn write_json<T: Serialize>(path: &Path, config_hash: &str, body: &T) -> Result<()> {
    let doc = Stamped {
        schema_version: SCHEMA_VERSION,
        config_hash: config_hash.to_string(),
        body,
    };
    let text = serde_json::to_string_pretty(&doc)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path, stage: &str) -> Result<T> {
    if !path.exists() {
        return Err(Error::MissingArtifact {
            path: path.to_path_buf(),
            stage: stage.into(),
        });
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: Stamped<T> = serde_json::from_str(&text)?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(Error::Validation(format!(
            "{} has schema version {}, expected {SCHEMA_VERSION}",
            path.display(),
            doc.schema_version
        )));
    }
    Ok(doc.body)
}

/// CSV with a leading `# schema_version=.. config_hash=..` comment line.
pub fn write_csv(path: &Path, config_hash: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    writeln!(file, "# schema_version={SCHEMA_VERSION} config_hash={config_hash}").map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a CSV written by [`write_csv`]: header plus rows.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)?;
    let header = r.headers()?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec?.iter().map(String::from).collect());
    }
    Ok((header, rows))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub fingerprint: String,
    /// Output file name (relative to the output directory) to content hash.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub stages: BTreeMap<String, StageRecord>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(Manifest {
                schema_version: SCHEMA_VERSION,
                stages: BTreeMap::new(),
            });
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let tmp = dir.join(format!("{MANIFEST_FILE}.tmp"));
        fs::write(&tmp, serde_json::to_string_pretty(self)? + "\n").map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }

    /// True when the stage last ran with this fingerprint and its outputs
    /// are still intact.
    pub fn is_current(&self, dir: &Path, stage: &str, fingerprint: &str) -> bool {
        let Some(rec) = self.stages.get(stage) else {
            return false;
        };
        rec.fingerprint == fingerprint
            && rec
                .outputs
                .iter()
                .all(|(name, hash)| hash_file(&dir.join(name)).is_ok_and(|h| &h == hash))
    }

    pub fn record(&mut self, dir: &Path, stage: &str, fingerprint: &str, outputs: &[String]) -> Result<()> {
        let mut map = BTreeMap::new();
        for name in outputs {
            map.insert(name.clone(), hash_file(&dir.join(name))?);
        }
        self.stages.insert(
            stage.to_string(),
            StageRecord {
                fingerprint: fingerprint.to_string(),
                outputs: map,
            },
        );
        Ok(())
    }
}

/// Fingerprint of a stage: its name, its config slice and its input files.
pub fn fingerprint(stage: &str, config: &impl Serialize, inputs: &[&Path]) -> Result<String> {
    let mut h = Sha256::new();
    h.update(stage.as_bytes());
    h.update([0]);
    h.update(serde_json::to_vec(config)?);
    for p in inputs {
        h.update([0]);
        h.update(hash_file(p)?.as_bytes());
    }
    Ok(hex::encode(h.finalize()))
}

/// Exclusive claim on an output directory, released on drop.
#[derive(Debug)]
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(DirLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Locked(path)),
            Err(e) => Err(Error::io(&path, e)),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
