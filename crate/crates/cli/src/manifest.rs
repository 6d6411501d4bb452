//! Per-command record of inputs, outputs and their SHA-256 digests.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};
use stardr::Result;

#[derive(Serialize)]
struct FileEntry {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct ManifestFile<'a> {
    command: &'a str,
    seed: u64,
    jobs: usize,
    wall_time_s: f64,
    config: String,
    inputs: Vec<FileEntry>,
    outputs: Vec<FileEntry>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

/// Collects the files a command touched. Outputs are written through
/// [`Run::write`] so none can be missed.
pub struct Run {
    command: &'static str,
    out: PathBuf,
    seed: u64,
    jobs: usize,
    started: Instant,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Run {
    pub fn start(command: &'static str, out: PathBuf, seed: u64, jobs: usize) -> Result<Self> {
        fs::create_dir_all(&out)?;
        Ok(Run {
            command,
            out,
            seed,
            jobs,
            started: Instant::now(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn out(&self) -> &Path {
        &self.out
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn input(&mut self, path: &Path) {
        if !self.inputs.iter().any(|p| p == path) {
            self.inputs.push(path.to_path_buf());
        }
    }

    /// Records a file some library routine already wrote.
    pub fn produced(&mut self, path: PathBuf) {
        if !self.outputs.contains(&path) {
            self.outputs.push(path);
        }
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.path(name);
        fs::write(&path, contents)?;
        self.produced(path.clone());
        Ok(path)
    }

    /// Echoes the resolved config and writes `manifest_<command>.toml`.
    pub fn finish(mut self, config_toml: &str) -> Result<PathBuf> {
        let config_name = format!("config_{}.toml", self.command);
        let config = self.write(&config_name, config_toml)?;
        let entries = |paths: &[PathBuf]| -> Result<Vec<FileEntry>> {
            paths
                .iter()
                .map(|p| {
                    Ok(FileEntry {
                        path: p.display().to_string(),
                        sha256: sha256_file(p)?,
                    })
                })
                .collect()
        };
        let manifest = ManifestFile {
            command: self.command,
            seed: self.seed,
            jobs: self.jobs,
            wall_time_s: self.started.elapsed().as_secs_f64(),
            config: config.display().to_string(),
            inputs: entries(&self.inputs)?,
            outputs: entries(&self.outputs)?,
        };
        let path = self.path(&format!("manifest_{}.toml", self.command));
        fs::write(&path, toml::to_string(&manifest).expect("manifest serializes"))?;
        Ok(path)
    }
}
