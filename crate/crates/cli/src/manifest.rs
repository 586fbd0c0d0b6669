//! Per-run manifests: the resolved configuration plus digests of inputs
//! and deterministic outputs.

use std::path::Path;

use serde::Serialize;

use crate::error::CliError;

pub const RUN_MANIFEST: &str = "run_manifest.json";

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub bytes: u64,
    pub crc32c: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self, CliError> {
        let data = std::fs::read(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        Ok(FileDigest {
            path: path.display().to_string(),
            bytes: data.len() as u64,
            crc32c: format!("{:08x}", crc32c::crc32c(&data)),
        })
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub core_version: &'static str,
    pub command: String,
    pub argv: Vec<String>,
    pub seed: Option<u64>,
    /// Resolved settings; for `train` this is also written as `config.json`
    /// and can be passed back with `--config`.
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    /// Outputs that replay bit-identically (timing reports are excluded).
    pub outputs: Vec<FileDigest>,
}

impl RunManifest {
    pub fn new(command: &str, seed: Option<u64>, config: serde_json::Value) -> Self {
        RunManifest {
            tool: "ocon",
            version: env!("CARGO_PKG_VERSION"),
            core_version: ocon_core::VERSION,
            command: command.into(),
            argv: std::env::args().collect(),
            seed,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        self.inputs.push(FileDigest::of(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<(), CliError> {
        self.outputs.push(FileDigest::of(path)?);
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        write_json(&dir.join(RUN_MANIFEST), self)
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(CliError::data)?;
    write_text(path, &(text + "\n"))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}
