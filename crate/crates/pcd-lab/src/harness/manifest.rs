use crate::error::Result;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Provenance of one run. Only `started_unix` and `elapsed_secs` vary between
/// identical re-runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    pub config_sha256: String,
    pub code_version: String,
    pub seeds: Vec<u64>,
    pub outputs: Vec<OutputRecord>,
    pub started_unix: u64,
    pub elapsed_secs: f64,
}

pub struct ManifestBuilder {
    manifest: RunManifest,
    clock: Instant,
}

impl ManifestBuilder {
    pub fn new(experiment: &str, canonical_config: &str, seeds: &[u64]) -> Self {
        let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        Self {
            manifest: RunManifest {
                experiment: experiment.to_string(),
                config_sha256: sha256_hex(canonical_config.as_bytes()),
                code_version: concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")).to_string(),
                seeds: seeds.to_vec(),
                outputs: Vec::new(),
                started_unix,
                elapsed_secs: 0.0,
            },
            clock: Instant::now(),
        }
    }

    pub fn record(&mut self, name: &str, bytes: &[u8]) {
        self.manifest.outputs.push(OutputRecord {
            name: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
    }

    /// Writes `bytes` to `dir/name` and records its checksum.
    pub fn write(&mut self, dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(name), bytes)?;
        self.record(name, bytes);
        Ok(())
    }

    pub fn finish(mut self) -> RunManifest {
        self.manifest.elapsed_secs = self.clock.elapsed().as_secs_f64();
        self.manifest
    }
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("manifest.json"), self.to_json())?;
        Ok(())
    }
}
