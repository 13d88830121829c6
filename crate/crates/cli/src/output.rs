//! Artifact writing and run manifests.
//!
//! Each command writes its CSV files plus `<name>_manifest.json` into the
//! output directory. The manifest holds only deterministic content, so it is
//! byte-identical across reruns and worker counts. Wall-clock time and the
//! worker count go to `<name>_timing.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Collects the files and summary of one command run.
pub struct Run {
    name: String,
    dir: PathBuf,
    config: Value,
    inputs: Vec<(String, Vec<u8>)>,
    outputs: BTreeMap<String, String>,
    pub counts: BTreeMap<String, Value>,
    pub checks: BTreeMap<String, bool>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config: &'a Value,
    input_hash: String,
    outputs: &'a BTreeMap<String, String>,
    counts: &'a BTreeMap<String, Value>,
    checks: &'a BTreeMap<String, bool>,
    passed: bool,
}

#[derive(Serialize)]
struct Timing {
    wall_clock_seconds: f64,
    workers: usize,
}

/// Git-style object hash: SHA-256 of `blob <len>\0` followed by the bytes.
pub fn blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

impl Run {
    pub fn new(name: &str, dir: &Path, config: &impl Serialize) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| {
            CliError::Config(format!("cannot create output directory {}: {e}", dir.display()))
        })?;
        Ok(Self {
            name: name.to_string(),
            dir: dir.to_path_buf(),
            config: serde_json::to_value(config).expect("configs serialize"),
            inputs: Vec::new(),
            outputs: BTreeMap::new(),
            counts: BTreeMap::new(),
            checks: BTreeMap::new(),
        })
    }

    /// Records the content of an input file for the input hash.
    pub fn input(&mut self, path: &Path, bytes: Vec<u8>) {
        self.inputs.push((path.display().to_string(), bytes));
    }

    pub fn count(&mut self, key: &str, value: impl Serialize) {
        self.counts.insert(key.to_string(), serde_json::to_value(value).expect("counts serialize"));
    }

    pub fn check(&mut self, key: &str, passed: bool) {
        self.checks.insert(key.to_string(), passed);
    }

    /// Writes `<name>_<suffix>` with the bytes produced by `fill`.
    pub fn file(
        &mut self,
        suffix: &str,
        fill: impl FnOnce(&mut Vec<u8>) -> rstlab::Result<()>,
    ) -> Result<(), CliError> {
        let mut buf = Vec::new();
        fill(&mut buf)?;
        let name = format!("{}_{suffix}", self.name);
        let path = self.dir.join(&name);
        fs::write(&path, &buf)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
        self.outputs.insert(name, blob_hash(&buf));
        Ok(())
    }

    pub fn json(&mut self, suffix: &str, value: &impl Serialize) -> Result<(), CliError> {
        self.file(suffix, |buf| {
            serde_json::to_writer_pretty(&mut *buf, value).expect("reports serialize");
            buf.push(b'\n');
            Ok(())
        })
    }

    pub fn passed(&self) -> bool {
        self.checks.values().all(|&b| b)
    }

    /// Writes the manifest and timing files and reports the outcome.
    pub fn finish(self, seconds: f64, workers: usize) -> Result<bool, CliError> {
        let mut input_bytes = serde_json::to_vec(&self.config).expect("configs serialize");
        for (name, bytes) in &self.inputs {
            input_bytes.extend_from_slice(name.as_bytes());
            input_bytes.push(0);
            input_bytes.extend_from_slice(bytes);
        }
        let passed = self.passed();
        let manifest = Manifest {
            command: &self.name,
            config: &self.config,
            input_hash: blob_hash(&input_bytes),
            outputs: &self.outputs,
            counts: &self.counts,
            checks: &self.checks,
            passed,
        };
        write_json(&self.dir.join(format!("{}_manifest.json", self.name)), &manifest)?;
        let timing = Timing { wall_clock_seconds: seconds, workers };
        write_json(&self.dir.join(format!("{}_timing.json", self.name)), &timing)?;
        let failed: Vec<&str> =
            self.checks.iter().filter(|(_, &ok)| !ok).map(|(k, _)| k.as_str()).collect();
        eprintln!(
            "rstlab {}: wrote {} files to {}{}",
            self.name,
            self.outputs.len() + 2,
            self.dir.display(),
            if failed.is_empty() { String::new() } else { format!("; failed checks: {}", failed.join(", ")) }
        );
        Ok(passed)
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("manifests serialize");
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}
