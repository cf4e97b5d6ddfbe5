//! `--config file.json` support: the file's keys become flags placed before
//! the ones given on the command line, so explicit flags win.

use std::ffi::OsString;
use std::path::Path;

use serde_json::Value;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("--config needs a file path")]
    MissingPath,
    #[error("cannot read config {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("config {path} is not valid json: {source}")]
    Parse { path: String, source: serde_json::Error },
    #[error("config {0} must hold a json object")]
    NotObject(String),
    #[error("config key {key:?} has unsupported value {value}")]
    Unsupported { key: String, value: String },
}

fn scalar(value: &Value) -> Option<String> {
    match value {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Turn a json object into flags: `"n_clusters": 20` gives `--n-clusters 20`,
/// `true` gives a bare switch, `false` and `null` are dropped and arrays
/// become one comma-separated value.
pub fn object_to_flags(object: &serde_json::Map<String, Value>) -> Result<Vec<String>, ConfigError> {
    let mut flags = Vec::new();
    for (key, value) in object {
        let flag = format!("--{}", key.replace('_', "-"));
        let unsupported = || ConfigError::Unsupported {
            key: key.clone(),
            value: value.to_string(),
        };
        match value {
            Value::Bool(true) => flags.push(flag),
            Value::Bool(false) | Value::Null => {}
            Value::Array(items) => {
                let parts: Option<Vec<String>> = items.iter().map(scalar).collect();
                flags.push(flag);
                flags.push(parts.ok_or_else(unsupported)?.join(","));
            }
            Value::Object(_) => return Err(unsupported()),
            other => {
                flags.push(flag);
                flags.push(scalar(other).ok_or_else(unsupported)?);
            }
        }
    }
    Ok(flags)
}

fn load(path: &Path) -> Result<Vec<String>, ConfigError> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: shown.clone(),
        source,
    })?;
    let value: Value = serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
        path: shown.clone(),
        source,
    })?;
    match value {
        Value::Object(map) => object_to_flags(&map),
        _ => Err(ConfigError::NotObject(shown)),
    }
}

/// Remove every `--config PATH` (or `--config=PATH`) and splice the file's
/// flags right after the subcommand name.
pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>, ConfigError> {
    let mut rest = Vec::with_capacity(args.len());
    let mut injected = Vec::new();
    let mut iter = args.into_iter();
    while let Some(arg) = iter.next() {
        let text = arg.to_string_lossy();
        if text == "--config" {
            let path = iter.next().ok_or(ConfigError::MissingPath)?;
            injected.extend(load(Path::new(&path))?);
        } else if let Some(path) = text.strip_prefix("--config=") {
            injected.extend(load(Path::new(path))?);
        } else {
            rest.push(arg);
        }
    }
    if injected.is_empty() {
        return Ok(rest);
    }
    // program name, global switches, then the subcommand
    let sub = rest
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map_or(rest.len(), |p| p + 2);
    let tail = rest.split_off(sub.min(rest.len()));
    rest.extend(injected.into_iter().map(OsString::from));
    rest.extend(tail);
    Ok(rest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn flags_from_object() {
        let v = json!({"n_clusters": 20, "tau": 0.5, "resample_pairs": true, "strict": false, "seeds": [1, 2]});
        let flags = object_to_flags(v.as_object().unwrap()).unwrap();
        assert_eq!(flags, ["--n-clusters", "20", "--resample-pairs", "--seeds", "1,2", "--tau", "0.5"]);
    }

    #[test]
    fn nested_objects_are_rejected() {
        let v = json!({"arch": {"x": 1}});
        assert!(object_to_flags(v.as_object().unwrap()).is_err());
    }
}
