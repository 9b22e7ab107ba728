//! Config-file layer: `key = value` lines become `TSEG_KEY` environment
//! defaults before argument parsing, so flags and real environment
//! variables both take precedence over the file.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};

use crate::exit::UsageError;

/// `--config` from the raw arguments, else `TSEG_CONFIG`.
fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--" {
            break;
        }
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
    }
    std::env::var_os("TSEG_CONFIG").map(PathBuf::from)
}

pub fn env_key(key: &str) -> String {
    format!("TSEG_{}", key.replace('-', "_").to_ascii_uppercase())
}

/// Parses the config file into (env name, value) pairs.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let table: toml::Table = text.parse().map_err(|e| UsageError(format!("config file: {e}")))?;
    let mut out = Vec::with_capacity(table.len());
    for (k, v) in table {
        let value = match v {
            toml::Value::String(s) => s,
            toml::Value::Integer(i) => i.to_string(),
            toml::Value::Float(f) => f.to_string(),
            toml::Value::Boolean(b) => b.to_string(),
            other => bail!(UsageError(format!("config key {k:?}: unsupported value {other}"))),
        };
        out.push((env_key(&k), value));
    }
    Ok(out)
}

pub fn apply_config_file(args: &[OsString]) -> Result<()> {
    let Some(path) = config_path(args) else { return Ok(()) };
    let text = fs::read_to_string(&path).with_context(|| format!("reading config {}", path.display()))?;
    for (key, value) in parse_config(&text)? {
        if std::env::var_os(&key).is_none() {
            std::env::set_var(key, value);
        }
    }
    Ok(())
}
