//! Per-run provenance record, written next to every command's outputs.

use serde::Serialize;
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub parameters: Value,
    pub seeds: Value,
    pub wall_time_s: f64,
}

pub struct ManifestBuilder {
    command: String,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    parameters: Value,
    seeds: Value,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str) -> ManifestBuilder {
        ManifestBuilder {
            command: command.to_string(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            parameters: Value::Null,
            seeds: Value::Null,
            started: Instant::now(),
        }
    }

    pub fn input(mut self, path: &Path) -> Self {
        self.inputs.push(path.to_path_buf());
        self
    }

    pub fn output(mut self, path: &Path) -> Self {
        self.outputs.push(path.to_path_buf());
        self
    }

    pub fn parameters<T: Serialize>(mut self, params: &T) -> Self {
        self.parameters = serde_json::to_value(params).expect("serializable parameters");
        self
    }

    pub fn seeds<T: Serialize>(mut self, seeds: &T) -> Self {
        self.seeds = serde_json::to_value(seeds).expect("serializable seeds");
        self
    }

    /// Writes the manifest to `path` and returns it.
    pub fn write(self, path: &Path) -> Result<RunManifest, spectrec_core::io::IoError> {
        let manifest = RunManifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: self.inputs,
            outputs: self.outputs,
            parameters: self.parameters,
            seeds: self.seeds,
            wall_time_s: self.started.elapsed().as_secs_f64(),
        };
        spectrec_core::io::write_json(&manifest, path)?;
        Ok(manifest)
    }
}

/// Default manifest location for a command with one primary output file.
pub fn sibling_manifest_path(output: &Path) -> PathBuf {
    let mut name = output
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".to_string());
    name.push_str(".manifest.json");
    output.with_file_name(name)
}
