//! Per-stage run manifests: content hashes of inputs and outputs plus the
//! parameters that produced them. Nothing machine- or time-dependent is
//! recorded, so identical runs produce identical manifests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub stage: String,
    pub version: String,
    pub seed: u64,
    pub params: Value,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::runtime(format!("hashing {}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// `path` relative to `root` with `/` separators; unrelated paths keep
/// only their file name.
pub fn display_path(path: &Path, root: &Path) -> String {
    let rel = path
        .strip_prefix(root)
        .map(Path::to_path_buf)
        .unwrap_or_else(|_| path.file_name().map(PathBuf::from).unwrap_or_default());
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

impl Manifest {
    pub fn new(stage: &str, seed: u64, params: Value) -> Self {
        Manifest {
            stage: stage.to_string(),
            version: VERSION.to_string(),
            seed,
            params,
            inputs: Vec::new(),
            outputs: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn input_as(&mut self, label: String, path: &Path) -> Result<(), CliError> {
        self.inputs.push(FileHash { path: label, sha256: sha256_file(path)? });
        Ok(())
    }

    pub fn input(&mut self, path: &Path, root: &Path) -> Result<(), CliError> {
        self.input_as(display_path(path, root), path)
    }

    pub fn output(&mut self, path: &Path, root: &Path) -> Result<(), CliError> {
        self.outputs.push(FileHash { path: display_path(path, root), sha256: sha256_file(path)? });
        Ok(())
    }

    pub fn path_in(&self, root: &Path) -> PathBuf {
        root.join(format!("{}.manifest.json", self.stage))
    }

    pub fn write(&self, root: &Path) -> Result<PathBuf, CliError> {
        let path = self.path_in(root);
        let mut text = serde_json::to_string_pretty(self).map_err(|e| CliError::runtime(e.to_string()))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::runtime(format!("writing {}: {e}", path.display())))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("abc");
        fs::write(&p, b"abc").unwrap();
        assert_eq!(
            sha256_file(&p).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn paths_are_relative_to_the_run() {
        assert_eq!(display_path(Path::new("/o/JJA/net.csv"), Path::new("/o")), "JJA/net.csv");
        assert_eq!(display_path(Path::new("/data/x.cng1"), Path::new("/o")), "x.cng1");
    }
}
