use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_text, sha256_hex, write_atomic, DATASET_FORMAT, DATASET_VERSION, POLICY_FORMAT, POLICY_VERSION};

pub const MANIFEST_FORMAT: &str = "hqi-manifest";
pub const MANIFEST_VERSION: u32 = 1;
/// Version of the results CSV columns.
pub const RESULTS_VERSION: u32 = 1;

/// Every file format this build reads or writes, with its version.
pub fn format_versions() -> BTreeMap<String, u32> {
    BTreeMap::from([
        (DATASET_FORMAT.to_string(), DATASET_VERSION),
        (POLICY_FORMAT.to_string(), POLICY_VERSION),
        (MANIFEST_FORMAT.to_string(), MANIFEST_VERSION),
        ("hqi-results".to_string(), RESULTS_VERSION),
    ])
}

pub fn unix_millis() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(FileDigest { path: path.to_path_buf(), sha256: sha256_hex(&bytes) })
    }
}

/// What a command ran with: the fully resolved configuration, its hash,
/// the seed, digests of the files read and written, and wall-clock times.
/// Re-running the command on `config` with the same inputs and binary
/// reproduces the outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub format: String,
    pub version: u32,
    pub command: String,
    pub crate_version: String,
    /// Effective configuration after flag overrides, as TOML.
    pub config: String,
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub formats: BTreeMap<String, u32>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
}

impl RunManifest {
    /// Starts a manifest at the current time.
    pub fn begin(command: &str, config: String, seed: Option<u64>) -> Self {
        let now = unix_millis();
        RunManifest {
            format: MANIFEST_FORMAT.into(),
            version: MANIFEST_VERSION,
            command: command.into(),
            crate_version: env!("CARGO_PKG_VERSION").into(),
            config_sha256: sha256_hex(config.as_bytes()),
            config,
            seed,
            formats: format_versions(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            started_unix_ms: now,
            finished_unix_ms: now,
        }
    }

    /// Replaces the recorded configuration and its hash.
    pub fn set_config(&mut self, config: String) {
        self.config_sha256 = sha256_hex(config.as_bytes());
        self.config = config;
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(FileDigest::of(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        self.outputs.push(FileDigest::of(path)?);
        Ok(())
    }

    /// Stamps the finish time and writes the manifest.
    pub fn finish(mut self, path: &Path) -> Result<Self> {
        self.finished_unix_ms = unix_millis();
        let json = serde_json::to_string_pretty(&self).expect("manifest serializes");
        write_atomic(path, json.as_bytes())?;
        Ok(self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: RunManifest =
            serde_json::from_str(&read_text(path)?).map_err(|e| Error::schema(format!("manifest: {e}")))?;
        if m.format != MANIFEST_FORMAT || m.version != MANIFEST_VERSION {
            return Err(Error::schema(format!("expected {MANIFEST_FORMAT} v{MANIFEST_VERSION}")));
        }
        Ok(m)
    }
}
