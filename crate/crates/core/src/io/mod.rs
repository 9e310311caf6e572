//! File formats: line-oriented datasets, JSON policies, TOML configs and
//! run manifests. Every writer goes through [`write_atomic`].

mod dataset;
mod manifest;
mod policy;

use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use dataset::{check_schema, format_dataset, parse_dataset, read_dataset, write_dataset, DATASET_FORMAT, DATASET_VERSION};
pub use manifest::{
    format_versions, unix_millis, FileDigest, RunManifest, MANIFEST_FORMAT, MANIFEST_VERSION, RESULTS_VERSION,
};
pub use policy::{load_policy, policy_from_json, policy_to_json, save_policy, POLICY_FORMAT, POLICY_VERSION};

/// Writes `contents` to a temporary file next to `path`, then renames it
/// over `path`, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(contents).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Lowercase hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Parses TOML text, reporting errors at their line.
pub fn parse_toml<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    toml::from_str(text).map_err(|e| {
        let line = e.span().map_or(0, |span| text[..span.start.min(text.len())].matches('\n').count() + 1);
        Error::Parse { path: path.to_path_buf(), line, message: e.message().to_string() }
    })
}

pub fn load_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    parse_toml(&read_text(path)?, path)
}
