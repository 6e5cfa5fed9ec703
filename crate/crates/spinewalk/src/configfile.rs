//! Flat key-value run configuration.
//!
//! Format: `key = value` lines, `#` comments, optional `[section]` headers
//! that prefix subsequent keys as `section.key`. Every key must be consumed
//! by the experiment that loads the config; leftovers are an error, so
//! typos fail fast.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got '{text}'")]
    Malformed { line: usize, text: String },
    #[error("duplicate key '{0}'")]
    Duplicate(String),
    #[error("missing required key '{0}'")]
    Missing(String),
    #[error("key '{key}': cannot parse '{value}' as {ty}")]
    Parse { key: String, value: String, ty: &'static str },
    #[error("unknown keys: {0}")]
    UnknownKeys(String),
}

#[derive(Debug)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
    consumed: RefCell<BTreeSet<String>>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                section = line[1..line.len() - 1].trim().to_string();
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::Malformed { line: i + 1, text: raw.to_string() });
            };
            let key = if section.is_empty() {
                k.trim().to_string()
            } else {
                format!("{section}.{}", k.trim())
            };
            if values.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(ConfigError::Duplicate(key));
            }
        }
        Ok(RunConfig { values, consumed: RefCell::new(BTreeSet::new()) })
    }

    fn raw(&self, key: &str) -> Option<String> {
        let v = self.values.get(key).cloned();
        if v.is_some() {
            self.consumed.borrow_mut().insert(key.to_string());
        }
        v
    }

    pub fn get_str(&self, key: &str) -> Result<String, ConfigError> {
        self.raw(key).ok_or_else(|| ConfigError::Missing(key.into()))
    }

    pub fn get_str_or(&self, key: &str, default: &str) -> String {
        self.raw(key).unwrap_or_else(|| default.to_string())
    }

    fn parse_as<T: std::str::FromStr>(key: &str, v: &str, ty: &'static str) -> Result<T, ConfigError> {
        v.parse::<T>().map_err(|_| ConfigError::Parse { key: key.into(), value: v.into(), ty })
    }

    pub fn get_f64(&self, key: &str) -> Result<f64, ConfigError> {
        Self::parse_as(key, &self.get_str(key)?, "f64")
    }

    pub fn get_f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.raw(key) {
            Some(v) => Self::parse_as(key, &v, "f64"),
            None => Ok(default),
        }
    }

    pub fn get_u64(&self, key: &str) -> Result<u64, ConfigError> {
        Self::parse_as(key, &self.get_str(key)?, "u64")
    }

    pub fn get_u64_or(&self, key: &str, default: u64) -> Result<u64, ConfigError> {
        match self.raw(key) {
            Some(v) => Self::parse_as(key, &v, "u64"),
            None => Ok(default),
        }
    }

    pub fn get_usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.raw(key) {
            Some(v) => Self::parse_as(key, &v, "usize"),
            None => Ok(default),
        }
    }

    pub fn get_bool_or(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.raw(key) {
            Some(v) => Self::parse_as(key, &v, "bool"),
            None => Ok(default),
        }
    }

    pub fn get_f64_list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let s = self.get_str(key)?;
        s.split(',')
            .map(|p| Self::parse_as(key, p.trim(), "f64"))
            .collect()
    }

    pub fn get_u64_list(&self, key: &str) -> Result<Vec<u64>, ConfigError> {
        let s = self.get_str(key)?;
        s.split(',')
            .map(|p| Self::parse_as(key, p.trim(), "u64"))
            .collect()
    }

    pub fn get_usize_list(&self, key: &str) -> Result<Vec<usize>, ConfigError> {
        let s = self.get_str(key)?;
        s.split(',')
            .map(|p| Self::parse_as(key, p.trim(), "usize"))
            .collect()
    }

    /// Reject any keys the experiment never consumed.
    pub fn finish(&self) -> Result<(), ConfigError> {
        let consumed = self.consumed.borrow();
        let unknown: Vec<&String> = self.values.keys().filter(|k| !consumed.contains(*k)).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::UnknownKeys(
                unknown.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", "),
            ))
        }
    }
}
