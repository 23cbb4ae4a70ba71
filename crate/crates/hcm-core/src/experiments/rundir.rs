//! Artifact directory with a checksum manifest.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

/// Collects artifact files under one directory and finishes with a
/// `manifest.json` listing every file's size and SHA-256 digest.
pub struct RunDir {
    root: PathBuf,
    files: Vec<String>,
}

#[derive(Serialize)]
struct ManifestEntry {
    file: String,
    bytes: u64,
    sha256: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl RunDir {
    pub fn create(root: &Path) -> Result<RunDir> {
        std::fs::create_dir_all(root)?;
        Ok(RunDir {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn write_string(&mut self, name: &str, content: &str) -> Result<()> {
        std::fs::write(self.root.join(name), content)?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_string(name, &text)
    }

    /// Writes a CSV table; every cell is already formatted.
    pub fn write_table(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut writer = csv::Writer::from_path(self.root.join(name))?;
        writer.write_record(header)?;
        for row in rows {
            writer.write_record(row)?;
        }
        writer.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// Writes `manifest.json` covering every file recorded so far.
    pub fn finish(mut self) -> Result<()> {
        self.files.sort();
        let mut entries = Vec::with_capacity(self.files.len());
        for name in &self.files {
            let bytes = std::fs::read(self.root.join(name))?;
            entries.push(ManifestEntry {
                file: name.clone(),
                bytes: bytes.len() as u64,
                sha256: sha256_hex(&bytes),
            });
        }
        let mut text = serde_json::to_string_pretty(&entries)?;
        text.push('\n');
        std::fs::write(self.root.join("manifest.json"), text)?;
        Ok(())
    }
}

/// Validates a manifest written by [`RunDir::finish`]: every listed file
/// must exist with the recorded size and digest. Returns the file count.
pub fn verify_manifest(root: &Path) -> Result<usize> {
    let text = std::fs::read_to_string(root.join("manifest.json"))?;
    let entries: Vec<serde_json::Value> = serde_json::from_str(&text)?;
    for entry in &entries {
        let file = entry["file"].as_str().unwrap_or_default();
        let bytes = std::fs::read(root.join(file))?;
        let digest = sha256_hex(&bytes);
        if digest != entry["sha256"].as_str().unwrap_or_default()
            || bytes.len() as u64 != entry["bytes"].as_u64().unwrap_or_default()
        {
            return Err(crate::error::Error::InvalidConfig(format!(
                "manifest mismatch for {file}"
            )));
        }
    }
    Ok(entries.len())
}
