use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::io;

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    /// File name to sha256.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub started: u64,
    pub finished: u64,
}

/// Enough to rerun every stage and get the same bytes out.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub rng_algorithm: String,
    pub config_sha256: Option<String>,
    pub base_seed: u64,
    pub allow_single: bool,
    pub stages: Vec<StageRecord>,
}

impl RunManifest {
    pub fn new(config_sha256: Option<String>, base_seed: u64, allow_single: bool) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            rng_algorithm: metastab::simulate::RNG_ALGORITHM.to_string(),
            config_sha256,
            base_seed,
            allow_single,
            stages: Vec::new(),
        }
    }

    /// Loads the manifest in `dir`, or starts a fresh one when it is absent
    /// or was written for a different configuration.
    pub fn load_or_new(dir: &Path, fresh: RunManifest) -> Self {
        match io::read_json::<RunManifest>(&dir.join(MANIFEST_FILE)) {
            Ok(m) if m.config_sha256 == fresh.config_sha256 && m.base_seed == fresh.base_seed => {
                RunManifest { stages: m.stages, ..fresh }
            }
            _ => fresh,
        }
    }

    pub fn record(&mut self, rec: StageRecord) {
        match self.stages.iter_mut().find(|s| s.stage == rec.stage) {
            Some(s) => *s = rec,
            None => self.stages.push(rec),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<(), CliError> {
        io::write_json(&dir.join(MANIFEST_FILE), self)
    }
}
