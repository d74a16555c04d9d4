//! Flat key/value config files. One `key = value` entry per line, `#`
//! comments; keys mirror the long flag names; command-line flags override
//! config entries. Unknown keys are rejected with a line diagnostic.

use std::collections::HashMap;
use std::path::Path;

pub const KNOWN_KEYS: &[&str] = &[
    "family",
    "mu",
    "lambda",
    "a",
    "b",
    "c",
    "D",
    "T",
    "h",
    "epsilon",
    "u",
    "u-max",
    "step",
    "level",
    "replicates",
    "seed",
    "variant",
    "workers",
    "out",
    "claims",
    "grid",
    "csv-row",
];

pub fn parse_config(path: &Path) -> Result<HashMap<String, String>, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let mut map = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!(
                "config line {}: expected 'key = value', got '{raw}'",
                lineno + 1
            ));
        };
        let key = key.trim();
        let value = value.trim();
        if !KNOWN_KEYS.contains(&key) {
            return Err(format!("config line {}: unknown key '{key}'", lineno + 1));
        }
        if value.is_empty() {
            return Err(format!(
                "config line {}: empty value for '{key}'",
                lineno + 1
            ));
        }
        if map.insert(key.to_string(), value.to_string()).is_some() {
            return Err(format!("config line {}: duplicate key '{key}'", lineno + 1));
        }
    }
    Ok(map)
}

pub fn get_parsed<T: std::str::FromStr>(
    map: &HashMap<String, String>,
    key: &str,
) -> Result<Option<T>, String>
where
    T::Err: std::fmt::Display,
{
    match map.get(key) {
        None => Ok(None),
        Some(raw) => raw
            .parse::<T>()
            .map(Some)
            .map_err(|e| format!("config key '{key}': bad value '{raw}': {e}")),
    }
}
