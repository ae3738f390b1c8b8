//! Resolving a train configuration from a JSON file, dotted `--set`
//! overrides and the shorthand flags.

use std::path::Path;

use factorvae::training::TrainConfig;
use serde_json::Value;

use crate::CliError;

pub fn load(path: Option<&Path>) -> Result<Value, CliError> {
    let base = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::path(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?
        }
        None => Value::Object(Default::default()),
    };
    // Start from the defaults so every key exists for dotted overrides.
    let mut full = serde_json::to_value(TrainConfig::default()).expect("defaults serialise");
    merge(&mut full, base, "")?;
    Ok(full)
}

/// Recursively overlays `patch` onto `base`; unknown keys are errors.
fn merge(base: &mut Value, patch: Value, prefix: &str) -> Result<(), CliError> {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v, &path)?,
                    Some(slot) => *slot = v,
                    None => return Err(CliError::config(format!("unknown config key `{path}`"))),
                }
            }
            Ok(())
        }
        (b, p) => {
            *b = p;
            Ok(())
        }
    }
}

/// Applies `key.path=value`; the value is parsed as JSON when it parses,
/// otherwise taken as a string.
pub fn set(config: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::config(format!("override `{assignment}` is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut slot = &mut *config;
    for part in key.split('.') {
        let next = match slot {
            Value::Object(map) => map.get_mut(part),
            _ => None,
        };
        slot = next.ok_or_else(|| CliError::config(format!("unknown config key `{key}`")))?;
    }
    *slot = value;
    Ok(())
}

pub fn resolve(value: Value) -> Result<TrainConfig, CliError> {
    let cfg: TrainConfig = serde_json::from_value(value).map_err(|e| CliError::config(e.to_string()))?;
    cfg.validate().map_err(CliError::from)?;
    Ok(cfg)
}
