//! Plain-text `key = value` configuration files.
//!
//! Lines are `key = value` pairs; blank lines and lines starting with `#`
//! are ignored. Later occurrences of a key win.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum KvError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    MissingEquals { line: u64, text: String },
    #[error("key `{key}`: {reason}")]
    BadValue { key: String, reason: String },
    #[error("unknown key `{key}`")]
    UnknownKey { key: String },
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>, KvError> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| KvError::MissingEquals { line: idx as u64 + 1, text: line.to_string() })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

pub fn bad_value(key: &str, reason: impl Into<String>) -> KvError {
    KvError::BadValue { key: key.to_string(), reason: reason.into() }
}

pub fn parse_typed<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, KvError> {
    value.parse::<T>().map_err(|_| bad_value(key, format!("cannot parse `{value}`")))
}
