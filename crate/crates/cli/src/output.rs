//! Run manifests and artifact writing.
//!
//! Payload files never contain a timestamp, so re-running a command with the
//! same manifest reproduces them byte for byte. The wall-clock time lives only
//! in `manifest.json`, next to the SHA-256 of every payload.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use trendlab_core::{Error, Result, StrategyConfig};

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: StrategyConfig,
    pub input_paths: Vec<String>,
    pub master_seed: u64,
    pub engine_version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub watermark: Option<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: StrategyConfig, inputs: &[&Path], master_seed: u64) -> Self {
        Self {
            command: command.to_string(),
            config,
            input_paths: inputs.iter().map(|p| p.display().to_string()).collect(),
            master_seed,
            engine_version: env!("CARGO_PKG_VERSION").to_string(),
            watermark: None,
        }
    }
}

#[derive(Serialize)]
struct Stamped<'a> {
    #[serde(flatten)]
    manifest: &'a RunManifest,
    timestamp: String,
    outputs: Vec<OutputDigest>,
}

#[derive(Serialize)]
struct OutputDigest {
    file: String,
    sha256: String,
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serialisable");
    bytes.push(b'\n');
    bytes
}

/// CSV body from a header and rows; floats use Rust's shortest round-trip form.
pub fn to_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Writes every payload into `dir` followed by `manifest.json`.
pub fn write_outputs(dir: &Path, manifest: &RunManifest, payloads: &[(&str, Vec<u8>)]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let mut written = Vec::with_capacity(payloads.len() + 1);
    let mut outputs = Vec::with_capacity(payloads.len());
    for (name, bytes) in payloads {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| io_error(&path, e))?;
        let digest = Sha256::digest(bytes);
        outputs.push(OutputDigest {
            file: name.to_string(),
            sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
        });
        written.push(path);
    }
    let stamped = Stamped {
        manifest,
        timestamp: chrono::Utc::now().to_rfc3339(),
        outputs,
    };
    let path = dir.join("manifest.json");
    fs::write(&path, to_json(&stamped)).map_err(|e| io_error(&path, e))?;
    written.push(path);
    Ok(written)
}
