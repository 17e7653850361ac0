//! Line-oriented `key = value` config files.
//!
//! Blank lines and lines starting with `#` are skipped. Keys use the long
//! flag names of the subcommand they configure (`-` and `_` are
//! interchangeable), and a flag given on the command line wins over the file.

use std::path::Path;

use crate::error::{Error, Result};

/// Parses `text` into `(key, value)` pairs in file order. Keys are
/// normalized to use `-`.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", i + 1)));
        }
        if out.iter().any(|(k, _)| *k == key) {
            return Err(Error::Config(format!("line {}: duplicate key {key}", i + 1)));
        }
        out.push((key, value.trim().to_string()));
    }
    Ok(out)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}
