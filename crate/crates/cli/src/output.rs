//! Deterministic file output: CSV tables, JSON summaries, and the run
//! manifest. No timestamps anywhere, so identical configs rewrite
//! byte-identical artifacts.

use std::fs;
use std::path::PathBuf;

use greenwalk_core::error::{Error, Result};
use serde::Serialize;

use crate::config::fnv1a;

#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<(String, u64)>,
}

impl OutputDir {
    pub fn new(root: &str) -> Result<OutputDir> {
        fs::create_dir_all(root).map_err(|e| Error::Io { path: root.into(), source: e })?;
        Ok(OutputDir { root: PathBuf::from(root), written: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_text(&mut self, name: &str, content: &str) -> Result<()> {
        self.write_bytes(name, content.as_bytes())
    }

    pub fn write_bytes(&mut self, name: &str, content: &[u8]) -> Result<()> {
        let path = self.path(name);
        fs::write(&path, content)
            .map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
        self.written.push((name.to_string(), fnv1a(content)));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)
            .map_err(|e| Error::Precondition(format!("json serialization failed: {e}")))?;
        self.write_text(name, &(text + "\n"))
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut text = header.join(",");
        text.push('\n');
        for row in rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        self.write_text(name, &text)
    }

    /// Plain-text manifest: config hash, seed, version, and per-file hashes.
    pub fn write_manifest(
        &mut self,
        config_hash: u64,
        seed: u64,
        stages: &[(String, String)],
    ) -> Result<()> {
        let mut text = String::new();
        text.push_str(&format!("config-hash {config_hash:016x}\n"));
        text.push_str(&format!("seed {seed}\n"));
        text.push_str(&format!("version {}\n", env!("CARGO_PKG_VERSION")));
        for (stage, status) in stages {
            text.push_str(&format!("stage {stage} {status}\n"));
        }
        let files = self.written.clone();
        for (name, hash) in files {
            text.push_str(&format!("file {name} {hash:016x}\n"));
        }
        let path = self.path("manifest.txt");
        fs::write(&path, &text)
            .map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
        Ok(())
    }
}
