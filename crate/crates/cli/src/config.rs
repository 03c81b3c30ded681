//! `key = value` config files with `[section]` headers.
//!
//! Every key is optional and defaults to the desk profile; unknown sections
//! and keys are errors. Values take the type of the default: numbers,
//! booleans, strings, or comma-separated number lists for pairs.

use std::fmt;
use std::path::Path;

use afc_core::orchestrator::RunConfig;
use serde_json::{Map, Number, Value};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn parse_scalar(default: &Value, raw: &str) -> Result<Value, String> {
    match default {
        Value::Number(n) if n.is_u64() => raw
            .parse::<u64>()
            .map(Value::from)
            .map_err(|_| format!("expected a non-negative integer, got {raw:?}")),
        Value::Number(_) => {
            let x: f64 = raw
                .parse()
                .map_err(|_| format!("expected a number, got {raw:?}"))?;
            Number::from_f64(x)
                .map(Value::Number)
                .ok_or_else(|| format!("expected a finite number, got {raw:?}"))
        }
        Value::Bool(_) => match raw {
            "true" => Ok(Value::Bool(true)),
            "false" => Ok(Value::Bool(false)),
            _ => Err(format!("expected true or false, got {raw:?}")),
        },
        Value::String(_) => Ok(Value::String(raw.to_string())),
        Value::Array(items) => {
            let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
            if parts.len() != items.len() {
                return Err(format!(
                    "expected {} comma-separated values, got {}",
                    items.len(),
                    parts.len()
                ));
            }
            items
                .iter()
                .zip(parts)
                .map(|(d, p)| parse_scalar(d, p))
                .collect::<Result<Vec<_>, _>>()
                .map(Value::Array)
        }
        _ => Err("unsupported key type".into()),
    }
}

/// Parses config text; `origin` names the source in error messages.
pub fn parse_config(text: &str, origin: &str) -> Result<RunConfig, ConfigError> {
    let mut root = serde_json::to_value(RunConfig::default()).expect("defaults serialize");
    let sections = root.as_object_mut().expect("config is an object");
    let mut current: Option<String> = None;
    for (n, line) in text.lines().enumerate() {
        let lineno = n + 1;
        let err = |m: String| ConfigError(format!("{origin}:{lineno}: {m}"));
        let line = line.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(format!("malformed section header {line:?}")))?
                .trim();
            if !sections.contains_key(name) {
                let known: Vec<&str> = sections.keys().map(String::as_str).collect();
                return Err(err(format!(
                    "unknown section [{name}] (expected one of {})",
                    known.join(", ")
                )));
            }
            current = Some(name.to_string());
            continue;
        }
        let (key, raw) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
        let (key, raw) = (key.trim(), raw.trim());
        let section = current
            .as_deref()
            .ok_or_else(|| err(format!("key {key:?} appears before any [section]")))?;
        let table: &mut Map<String, Value> =
            sections[section].as_object_mut().expect("section is an object");
        let default = table
            .get(key)
            .ok_or_else(|| err(format!("unknown key {key:?} in [{section}]")))?;
        let value = parse_scalar(default, raw).map_err(|m| err(format!("key {key:?}: {m}")))?;
        table.insert(key.to_string(), value);
    }
    let cfg: RunConfig = serde_json::from_value(root)
        .map_err(|e| ConfigError(format!("{origin}: {e}")))?;
    cfg.validate()
        .map_err(|e| ConfigError(format!("{origin}: {e}")))?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read config file {}: {e}", path.display())))?;
    parse_config(&text, &path.display().to_string())
}

/// Renders a config in the file format; parsing the output gives it back.
pub fn render_config(cfg: &RunConfig) -> String {
    let root = serde_json::to_value(cfg).expect("config serializes");
    let mut out = String::new();
    for (section, table) in root.as_object().expect("object") {
        out.push_str(&format!("[{section}]\n"));
        for (key, value) in table.as_object().expect("object") {
            let text = match value {
                Value::String(s) => s.clone(),
                Value::Array(items) => items
                    .iter()
                    .map(Value::to_string)
                    .collect::<Vec<_>>()
                    .join(", "),
                other => other.to_string(),
            };
            out.push_str(&format!("{key} = {text}\n"));
        }
        out.push('\n');
    }
    out
}
