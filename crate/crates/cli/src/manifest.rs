//! Run manifests: every subcommand that writes files drops a manifest next
//! to its outputs, recording the resolved options, seeds and timestamps.
//! Re-running with the same manifest reproduces identical outputs (the
//! timestamps differ, the artifacts do not).

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub options: serde_json::Value,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub seeds: Vec<u64>,
    pub tool_version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
}

pub struct ManifestBuilder {
    subcommand: String,
    options: serde_json::Value,
    inputs: Vec<String>,
    outputs: Vec<String>,
    seeds: Vec<u64>,
    started_unix: u64,
}

impl ManifestBuilder {
    pub fn new(subcommand: &str, options: serde_json::Value) -> ManifestBuilder {
        ManifestBuilder {
            subcommand: subcommand.to_string(),
            options,
            inputs: Vec::new(),
            outputs: Vec::new(),
            seeds: Vec::new(),
            started_unix: now(),
        }
    }

    pub fn input(&mut self, p: &Path) -> &mut Self {
        self.inputs.push(p.display().to_string());
        self
    }

    pub fn output(&mut self, p: &Path) -> &mut Self {
        self.outputs.push(p.display().to_string());
        self
    }

    pub fn seed(&mut self, s: u64) -> &mut Self {
        self.seeds.push(s);
        self
    }

    /// Writes `manifest.json` into `dir`.
    pub fn write_into_dir(self, dir: &Path) -> Result<PathBuf, CliError> {
        self.write_to(dir.join("manifest.json"))
    }

    /// Writes `<file>.manifest.json` next to a single-file output.
    pub fn write_beside(self, file: &Path) -> Result<PathBuf, CliError> {
        let mut name = file.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        self.write_to(file.with_file_name(name))
    }

    fn write_to(self, path: PathBuf) -> Result<PathBuf, CliError> {
        let manifest = RunManifest {
            subcommand: self.subcommand,
            options: self.options,
            inputs: self.inputs,
            outputs: self.outputs,
            seeds: self.seeds,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix: self.started_unix,
            finished_unix: now(),
        };
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
        Ok(path)
    }
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
