//! Run manifest, file digests and the run-directory lock.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const LOCK_FILE: &str = "run.lock";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// Subcommand that created the directory.
    pub command: String,
    pub config_path: String,
    pub config_snapshot: String,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
    /// Absolute input path → SHA-256.
    pub inputs: BTreeMap<String, String>,
    /// Path relative to the run directory → SHA-256.
    pub outputs: BTreeMap<String, String>,
}

pub fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

impl RunManifest {
    pub fn new(command: &str, config_path: &Path, config_snapshot: String, inputs: BTreeMap<String, String>) -> Self {
        Self {
            tool: "strata".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_path: config_path.display().to_string(),
            config_snapshot,
            started_unix: now_unix(),
            finished_unix: None,
            inputs,
            outputs: BTreeMap::new(),
        }
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, CliError> {
        let m: RunManifest =
            serde_json::from_slice(bytes).map_err(|e| CliError::input(format!("malformed manifest: {e}")))?;
        if m.tool != "strata" {
            return Err(CliError::input(format!("manifest was written by `{}`", m.tool)));
        }
        for (k, v) in m.inputs.iter().chain(&m.outputs) {
            if v.len() != 64 || !v.bytes().all(|b| b.is_ascii_hexdigit()) {
                return Err(CliError::input(format!("manifest digest for {k} is not SHA-256 hex")));
            }
        }
        for k in m.outputs.keys() {
            let p = Path::new(k);
            if p.is_absolute() || p.components().any(|c| matches!(c, std::path::Component::ParentDir)) {
                return Err(CliError::input(format!("manifest output {k} escapes the run directory")));
            }
        }
        Ok(m)
    }

    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST_FILE);
        let bytes = std::fs::read(&path)
            .map_err(|_| CliError::input(format!("{} has no {MANIFEST_FILE}; not a run directory", dir.display())))?;
        Self::parse(&bytes)
    }

    pub fn save(&self, dir: &Path) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(self).map_err(|e| CliError::internal(e.to_string()))?;
        bytes.push(b'\n');
        strata_core::io::write_atomic(&dir.join(MANIFEST_FILE), &bytes)?;
        Ok(())
    }

    /// Hashes `rel` (relative to `dir`) into the output list.
    pub fn record(&mut self, dir: &Path, rel: &str) -> Result<(), CliError> {
        let d = file_digest(&dir.join(rel))?;
        self.outputs.insert(rel.to_string(), d);
        Ok(())
    }

    /// Every recorded output must still hash to its digest.
    pub fn verify_outputs(&self, dir: &Path) -> Result<(), CliError> {
        for (rel, want) in &self.outputs {
            let got = file_digest(&dir.join(rel))?;
            if &got != want {
                return Err(CliError::input(format!("digest mismatch for {rel}: the run directory was modified")));
            }
        }
        Ok(())
    }

    /// Every recorded input must still hash to its digest.
    pub fn verify_inputs(&self) -> Result<(), CliError> {
        for (path, want) in &self.inputs {
            let got = file_digest(Path::new(path))?;
            if &got != want {
                return Err(CliError::input(format!("input {path} changed since the run started")));
            }
        }
        Ok(())
    }
}

/// Exclusive lock on a run directory, released on drop.
#[derive(Debug)]
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(LOCK_FILE);
        let mut f = OpenOptions::new().write(true).create_new(true).open(&path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::AlreadyExists {
                CliError::input(format!(
                    "{} is locked by another process (remove {LOCK_FILE} if that process is gone)",
                    dir.display()
                ))
            } else {
                CliError::input(format!("cannot lock {}: {e}", dir.display()))
            }
        })?;
        let _ = writeln!(f, "{}", std::process::id());
        Ok(Self { path })
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn lock_is_exclusive_and_released() {
        let dir = tempfile::tempdir().unwrap();
        let a = RunLock::acquire(dir.path()).unwrap();
        assert!(RunLock::acquire(dir.path()).is_err());
        drop(a);
        assert!(RunLock::acquire(dir.path()).is_ok());
    }

    #[test]
    fn manifest_rejects_escaping_outputs() {
        let mut m = RunManifest::new("critical", Path::new("/x.toml"), String::new(), BTreeMap::new());
        m.outputs.insert("../evil".into(), sha256_hex(b""));
        let bytes = serde_json::to_vec(&m).unwrap();
        assert!(RunManifest::parse(&bytes).is_err());
    }
}
