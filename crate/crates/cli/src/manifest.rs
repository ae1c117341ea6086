//! `run_manifest.json`, written next to every command's outputs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: Value,
    pub seed: Option<u64>,
    pub inputs: Vec<InputDigest>,
    /// Column means removed at ingestion; model outputs are in centered coordinates.
    pub centering_means: Option<Vec<f64>>,
    pub variables: Option<Vec<String>>,
    pub dropped_rows: Option<usize>,
    pub outputs: Vec<String>,
    pub details: Value,
    pub wall_seconds: f64,
}

pub struct ManifestBuilder {
    started: Instant,
    manifest: RunManifest,
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(CliError::io(format!("reading {}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl ManifestBuilder {
    pub fn new(command: &str, config: Value, seed: Option<u64>) -> Self {
        Self {
            started: Instant::now(),
            manifest: RunManifest {
                command: command.to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                config,
                seed,
                inputs: Vec::new(),
                centering_means: None,
                variables: None,
                dropped_rows: None,
                outputs: Vec::new(),
                details: Value::Null,
                wall_seconds: 0.0,
            },
        }
    }

    pub fn inputs(&mut self, paths: &[PathBuf]) -> CliResult<&mut Self> {
        for p in paths {
            self.manifest.inputs.push(InputDigest {
                path: p.display().to_string(),
                sha256: sha256_file(p)?,
            });
        }
        Ok(self)
    }

    pub fn ingestion(&mut self, ing: &crate::ingest::Ingested) -> CliResult<&mut Self> {
        self.inputs(&ing.sources)?;
        self.manifest.centering_means = Some(ing.means.iter().copied().collect());
        self.manifest.variables = Some(ing.names.clone());
        self.manifest.dropped_rows = Some(ing.dropped_rows);
        Ok(self)
    }

    pub fn output(&mut self, name: impl Into<String>) -> &mut Self {
        self.manifest.outputs.push(name.into());
        self
    }

    pub fn details(&mut self, details: Value) -> &mut Self {
        self.manifest.details = details;
        self
    }

    pub fn write(&mut self, dir: &Path) -> CliResult<()> {
        self.write_file(&dir.join("run_manifest.json"))
    }

    pub fn write_file(&mut self, path: &Path) -> CliResult<()> {
        self.manifest.wall_seconds = self.started.elapsed().as_secs_f64();
        write_json(path, &self.manifest)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Input(format!("serializing {}: {e}", path.display())))?;
    std::fs::write(path, text + "\n").map_err(CliError::io(format!("writing {}", path.display())))
}
