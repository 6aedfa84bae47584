//! Per-invocation bookkeeping: input digests, atomic output writes, and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: &'static str,
    pub version: &'static str,
    pub seed: Option<u64>,
    pub params: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    /// Output file names, relative to the output directory.
    pub outputs: Vec<String>,
    pub duration_secs: f64,
}

pub struct Run {
    subcommand: &'static str,
    out_dir: PathBuf,
    seed: Option<u64>,
    inputs: Vec<InputDigest>,
    outputs: Vec<String>,
    started: Instant,
}

impl Run {
    pub fn new(subcommand: &'static str, out_dir: &Path, seed: Option<u64>) -> Self {
        Self {
            subcommand,
            out_dir: out_dir.to_path_buf(),
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    /// Hashes an input file, failing with its path if it cannot be read.
    pub fn input(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).with_context(|| format!("cannot read input file {}", path.display()))?;
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(())
    }

    /// Output location: absolute paths are kept, relative ones land in the output directory.
    pub fn resolve(&self, name: &Path) -> PathBuf {
        if name.is_absolute() {
            name.to_path_buf()
        } else {
            self.out_dir.join(name)
        }
    }

    pub fn write(&mut self, name: &Path, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.resolve(name);
        write_atomic(&path, bytes)?;
        self.outputs.push(name.display().to_string());
        Ok(path)
    }

    pub fn write_json<S: Serialize>(&mut self, name: &Path, value: &S) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).context("serializing output")?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Writes `<primary output stem>.manifest.json` beside the first output.
    pub fn finish(self, params: serde_json::Value) -> Result<()> {
        let path = match self.outputs.first() {
            Some(first) => sibling(&self.resolve(Path::new(first)), "manifest.json"),
            None => self.out_dir.join(format!("{}.manifest.json", self.subcommand)),
        };
        let manifest = RunManifest {
            subcommand: self.subcommand,
            version: env!("CARGO_PKG_VERSION"),
            seed: self.seed,
            params,
            inputs: self.inputs,
            outputs: self.outputs,
            duration_secs: self.started.elapsed().as_secs_f64(),
        };
        let mut text = serde_json::to_string_pretty(&manifest).context("serializing manifest")?;
        text.push('\n');
        write_atomic(&path, text.as_bytes())
    }
}

/// Temp file in the destination directory, then rename over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).with_context(|| format!("cannot create directory {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("cannot write {}", path.display()))?;
    tmp.write_all(bytes)
        .with_context(|| format!("cannot write {}", path.display()))?;
    tmp.persist(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// `stem.suffix` next to `path`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    path.with_file_name(format!("{stem}.{suffix}"))
}
