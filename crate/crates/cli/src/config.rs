//! Config resolution: defaults, then a JSON file, then `--set` overrides,
//! then the global `--seed` / `--reps` flags.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

pub struct Overrides<'a> {
    pub file: Option<&'a Path>,
    pub sets: &'a [String],
    pub seed: Option<u64>,
    pub reps: Option<usize>,
}

pub fn resolve<C: Serialize + DeserializeOwned>(
    defaults: &C,
    ov: &Overrides,
) -> Result<(C, Value), CliError> {
    let mut value = serde_json::to_value(defaults).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(path) = ov.file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let file: Value = serde_json::from_str(&text).map_err(|e| {
            CliError::Usage(format!("config {} is not valid JSON: {e}", path.display()))
        })?;
        merge_top_level(&mut value, file)?;
    }
    for s in ov.sets {
        let (key, raw) = s
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got {s:?}")))?;
        set_path(&mut value, key, parse_value(raw))?;
    }
    if let Some(seed) = ov.seed {
        set_path(&mut value, "seed", Value::from(seed)).map_err(|_| flag_unused("--seed"))?;
    }
    if let Some(reps) = ov.reps {
        set_path(&mut value, "reps", Value::from(reps)).map_err(|_| flag_unused("--reps"))?;
    }
    let config = serde_json::from_value(value.clone())
        .map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
    Ok((config, value))
}

fn flag_unused(flag: &str) -> CliError {
    CliError::Usage(format!("{flag} does not apply to this subcommand"))
}

/// Values that parse as JSON are taken as such, anything else as a string.
pub fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Replaces top-level keys. Unknown keys are rejected later by the typed config.
fn merge_top_level(base: &mut Value, file: Value) -> Result<(), CliError> {
    let (Value::Object(base), Value::Object(file)) = (base, file) else {
        return Err(CliError::Usage(
            "config file must hold a JSON object".into(),
        ));
    };
    for (k, v) in file {
        base.insert(k, v);
    }
    Ok(())
}

/// Sets a dotted path whose last key must already exist in its parent object.
pub fn set_path(value: &mut Value, path: &str, new: Value) -> Result<(), CliError> {
    let unknown = || CliError::Usage(format!("unknown config key {path:?}"));
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts.pop().ok_or_else(unknown)?;
    let mut cur = value;
    for p in parts {
        cur = match cur {
            Value::Object(m) => m.get_mut(p).ok_or_else(unknown)?,
            Value::Array(a) => p
                .parse::<usize>()
                .ok()
                .and_then(|i| a.get_mut(i))
                .ok_or_else(unknown)?,
            _ => return Err(unknown()),
        };
    }
    match cur {
        Value::Object(m) if m.contains_key(last) => {
            m.insert(last.to_string(), new);
            Ok(())
        }
        Value::Array(a) => {
            let slot = last
                .parse::<usize>()
                .ok()
                .and_then(|i| a.get_mut(i))
                .ok_or_else(unknown)?;
            *slot = new;
            Ok(())
        }
        _ => Err(unknown()),
    }
}

pub fn object(pairs: Vec<(&str, Value)>) -> Value {
    Value::Object(
        pairs
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect::<Map<_, _>>(),
    )
}
