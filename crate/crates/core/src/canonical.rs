//! Canonical JSON: sorted object keys, two-space indentation, floats with
//! 17 significant digits. Two serialisations of equal values are byte-equal.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::{Number, Value};

use crate::{Error, Result};

pub fn to_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let value = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&mut out, &value, 0, true);
    out.push('\n');
    Ok(out)
}

/// Single-line canonical form, used for jsonl records.
pub fn to_line<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let value = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&mut out, &value, 0, false);
    Ok(out)
}

pub fn write_file<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = to_string(value)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn format_f64(x: f64) -> String {
    if !x.is_finite() {
        return "null".to_string();
    }
    format!("{x:.16e}")
}

fn write_number(out: &mut String, n: &Number) {
    if let Some(u) = n.as_u64() {
        let _ = write!(out, "{u}");
    } else if let Some(i) = n.as_i64() {
        let _ = write!(out, "{i}");
    } else {
        out.push_str(&format_f64(n.as_f64().unwrap_or(f64::NAN)));
    }
}

fn indent(out: &mut String, level: usize) {
    out.push('\n');
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn write_value(out: &mut String, value: &Value, level: usize, pretty: bool) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => write_number(out, n),
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("string serialisation is infallible"))
        }
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            // scalar arrays stay on one line
            let flat = !pretty || items.iter().all(|v| !v.is_array() && !v.is_object());
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                if flat {
                    write_value(out, item, level + 1, pretty);
                } else {
                    indent(out, level + 1);
                    write_value(out, item, level + 1, pretty);
                }
            }
            if !flat {
                indent(out, level);
            }
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                if pretty {
                    indent(out, level + 1);
                }
                out.push_str(&serde_json::to_string(key).expect("string serialisation is infallible"));
                out.push(':');
                if pretty {
                    out.push(' ');
                }
                write_value(out, &map[*key], level + 1, pretty);
            }
            if pretty {
                indent(out, level);
            }
            out.push('}');
        }
    }
}
