//! Option layering: built-in defaults, then the `--config` file, then
//! flags. Each command's options are one struct of `Option` fields that
//! doubles as the config file schema.

use std::path::{Path, PathBuf};

use hqi_core::hierarchy::{builtin, DagConfig};
use hqi_core::io::{load_toml, parse_toml, read_text};
use hqi_core::mdp::ActionSpace;
use hqi_core::taxi::TaxiConfig;
use hqi_core::{Error, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

pub trait Layered: Serialize + DeserializeOwned {
    fn defaults() -> Self;
}

fn overlay(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                if v.is_null() {
                    continue;
                }
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => overlay(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, t) => *b = t,
    }
}

/// Effective options: defaults, overridden by the file, overridden by flags.
pub fn resolve<T: Layered>(config: Option<&Path>, flags: &T) -> Result<T> {
    let mut merged = serde_json::to_value(T::defaults()).expect("options serialize");
    if let Some(path) = config {
        let file: T = load_toml(path)?;
        overlay(&mut merged, serde_json::to_value(file).expect("options serialize"));
    }
    overlay(&mut merged, serde_json::to_value(flags).expect("options serialize"));
    serde_json::from_value(merged).map_err(|e| Error::config(e.to_string()))
}

pub fn to_toml<T: Serialize>(value: &T) -> String {
    toml::to_string(value).expect("options serialize to TOML")
}

pub fn required<'a, T>(value: &'a Option<T>, flag: &str) -> Result<&'a T> {
    value.as_ref().ok_or_else(|| Error::config(format!("missing required option `{flag}`")))
}

/// Taxi settings from a file, or the standard domain.
pub fn load_env(path: Option<&PathBuf>) -> Result<TaxiConfig> {
    match path {
        Some(p) => load_toml(p),
        None => Ok(TaxiConfig::default()),
    }
}

/// A built-in hierarchy name, or a path to a DAG config file.
pub fn load_dag(spec: &str, actions: &ActionSpace) -> Result<(DagConfig, Option<PathBuf>)> {
    if let Some(cfg) = builtin(spec, actions) {
        return Ok((cfg, None));
    }
    let path = PathBuf::from(spec);
    if !path.exists() {
        return Err(Error::config(format!("`{spec}` is neither a built-in hierarchy nor a file")));
    }
    let cfg = parse_toml(&read_text(&path)?, &path)?;
    Ok((cfg, Some(path)))
}
