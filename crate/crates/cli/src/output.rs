//! Output directory handling and the reproducibility manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use rb_isac::ScenarioConfig;

#[derive(Serialize)]
struct OutputEntry {
    file: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: String,
    config: &'a ScenarioConfig,
    master_seed: u64,
    version: &'static str,
    outputs: Vec<OutputEntry>,
    runtime_seconds: f64,
}

/// Collects written files and finalizes the manifest for one command run.
pub struct RunContext {
    out_dir: PathBuf,
    command: String,
    master_seed: u64,
    outputs: Vec<OutputEntry>,
    started: Instant,
}

impl RunContext {
    pub fn new(out_dir: &Path, command: String, master_seed: u64) -> std::io::Result<Self> {
        fs::create_dir_all(out_dir)?;
        Ok(RunContext {
            out_dir: out_dir.to_path_buf(),
            command,
            master_seed,
            outputs: Vec::new(),
            started: Instant::now(),
        })
    }

    /// Write one output file and record its checksum.
    pub fn write_file(&mut self, name: &str, contents: &str) -> std::io::Result<PathBuf> {
        let path = self.out_dir.join(name);
        fs::write(&path, contents)?;
        let mut hasher = Sha256::new();
        hasher.update(contents.as_bytes());
        self.outputs.push(OutputEntry {
            file: name.to_string(),
            sha256: format!("{:x}", hasher.finalize()),
        });
        Ok(path)
    }

    /// Write `manifest.json` listing every produced file with its checksum.
    pub fn finalize(self, cfg: &ScenarioConfig) -> std::io::Result<()> {
        let manifest = Manifest {
            command: self.command,
            config: cfg,
            master_seed: self.master_seed,
            version: env!("CARGO_PKG_VERSION"),
            outputs: self.outputs,
            runtime_seconds: self.started.elapsed().as_secs_f64(),
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(self.out_dir.join("manifest.json"), text)
    }
}
