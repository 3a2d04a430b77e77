//! Flat `key = value` configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are unique.
//! Command-line flags are layered on top of a file with [`KvConfig::merge`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Keys that only steer where and how a run executes, not what it computes.
pub const NON_SEMANTIC_KEYS: [&str; 2] = ["out_dir", "threads"];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KvConfig {
    entries: BTreeMap<String, String>,
}

impl KvConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = Self::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected `key = value`", lineno + 1)))?;
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(CliError::Usage(format!("config line {}: bad key `{key}`", lineno + 1)));
            }
            if cfg.entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(CliError::Usage(format!("config line {}: duplicate key `{key}`", lineno + 1)));
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    /// Set `key` only if `value` is present.
    pub fn set_opt<T: Display>(&mut self, key: &str, value: Option<T>) {
        if let Some(v) = value {
            self.set(key, v);
        }
    }

    /// Layer `overrides` on top; its entries win.
    pub fn merge(&mut self, overrides: &KvConfig) {
        for (k, v) in &overrides.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Sorted `key = value` lines; parses back to an equal config.
    pub fn to_kv_string(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// SHA-256 of the sorted semantic entries, as lowercase hex.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        for (k, v) in &self.entries {
            if NON_SEMANTIC_KEYS.contains(&k.as_str()) {
                continue;
            }
            hasher.update(k.as_bytes());
            hasher.update(b"=");
            hasher.update(v.as_bytes());
            hasher.update(b"\n");
        }
        hex(&hasher.finalize())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Typed reads from a config that remember every key consumed, so the
/// resolved config holds exactly the settings a command used, defaults
/// included.
#[derive(Debug)]
pub struct Resolver {
    source: KvConfig,
    resolved: KvConfig,
    used: BTreeSet<String>,
}

impl Resolver {
    pub fn new(source: KvConfig) -> Self {
        Self { source, resolved: KvConfig::new(), used: BTreeSet::new() }
    }

    fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        raw.parse::<T>()
            .map_err(|e| CliError::Usage(format!("invalid value `{raw}` for `{key}`: {e}")))
    }

    /// Value of `key`, falling back to `default`.
    pub fn get_or<T>(&mut self, key: &str, default: T) -> Result<T, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        self.used.insert(key.to_string());
        let value = match self.source.get(key) {
            Some(raw) => Self::parse_value(key, raw)?,
            None => default,
        };
        self.resolved.set(key, &value);
        Ok(value)
    }

    /// Raw string value of `key`, if set; recorded only when present.
    pub fn get_str(&mut self, key: &str) -> Option<String> {
        self.used.insert(key.to_string());
        let v = self.source.get(key).map(str::to_string);
        if let Some(v) = &v {
            self.resolved.set(key, v);
        }
        v
    }

    /// Keys present in the source that no read asked for.
    pub fn unused_keys(&self) -> Vec<String> {
        self.source.keys().filter(|k| !self.used.contains(*k)).map(str::to_string).collect()
    }

    pub fn resolved(&self) -> &KvConfig {
        &self.resolved
    }

    pub fn into_resolved(self) -> KvConfig {
        self.resolved
    }
}
