//! Flat dotted-key configuration.
//!
//! A config file is TOML whose tables are flattened to dotted keys (`[cap] p = [2.0]` and
//! `"cap.p" = [2.0]` are the same field), or a `manifest.json` written by a previous run, whose
//! `config` object is read back verbatim. Every key must be consumed by the selected task.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub reason: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError { field: field.into(), reason: reason.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config field `{}`: {}", self.field, self.reason)
    }
}

impl std::error::Error for ConfigError {}

pub type ConfigResult<T> = Result<T, ConfigError>;

#[derive(Debug, Default)]
pub struct Config {
    values: BTreeMap<String, Value>,
    used: RefCell<BTreeSet<String>>,
    resolved: RefCell<BTreeMap<String, Value>>,
}

fn flatten(prefix: &str, v: Value, out: &mut BTreeMap<String, Value>) {
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                let key = if prefix.is_empty() { k } else { format!("{prefix}.{k}") };
                flatten(&key, x, out);
            }
        }
        other => {
            out.insert(prefix.to_string(), other);
        }
    }
}

impl Config {
    pub fn from_value(v: Value) -> ConfigResult<Self> {
        if !v.is_object() {
            return Err(ConfigError::new("<root>", "expected a table of keys"));
        }
        let mut values = BTreeMap::new();
        flatten("", v, &mut values);
        Ok(Config { values, ..Default::default() })
    }

    pub fn parse_toml(text: &str) -> ConfigResult<Self> {
        let t: toml::Table =
            text.parse().map_err(|e: toml::de::Error| ConfigError::new("<file>", e.message().to_string()))?;
        let v = serde_json::to_value(t).map_err(|e| ConfigError::new("<file>", e.to_string()))?;
        Self::from_value(v)
    }

    /// Reads TOML, or JSON when the file ends in `.json` (a manifest's `config` object if present).
    pub fn load(path: &Path) -> ConfigResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("--config", format!("{}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            let mut v: Value = serde_json::from_str(&text).map_err(|e| ConfigError::new("<file>", e.to_string()))?;
            if let Some(c) = v.get_mut("config") {
                v = c.take();
            }
            Self::from_value(v)
        } else {
            Self::parse_toml(&text)
        }
    }

    pub fn set(&mut self, key: &str, v: Value) {
        self.values.insert(key.to_string(), v);
    }

    /// Reads a key without recording it in the resolved config.
    pub fn peek<T: DeserializeOwned>(&self, key: &str) -> ConfigResult<Option<T>> {
        self.used.borrow_mut().insert(key.to_string());
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => T::deserialize(v).map(Some).map_err(|e| ConfigError::new(key, e.to_string())),
        }
    }

    pub fn get<T: DeserializeOwned + Serialize>(&self, key: &str) -> ConfigResult<Option<T>> {
        let v = self.peek::<T>(key)?;
        if let Some(x) = &v {
            self.record(key, x);
        }
        Ok(v)
    }

    pub fn get_or<T: DeserializeOwned + Serialize>(&self, key: &str, default: T) -> ConfigResult<T> {
        let v = self.peek::<T>(key)?.unwrap_or(default);
        self.record(key, &v);
        Ok(v)
    }

    pub fn require<T: DeserializeOwned + Serialize>(&self, key: &str) -> ConfigResult<T> {
        self.get(key)?.ok_or_else(|| ConfigError::new(key, "missing"))
    }

    pub fn record<T: Serialize>(&self, key: &str, v: &T) {
        let v = serde_json::to_value(v).expect("config values serialize");
        self.resolved.borrow_mut().insert(key.to_string(), v);
    }

    /// Fails on the first key no task step consumed.
    pub fn finish(&self) -> ConfigResult<()> {
        let used = self.used.borrow();
        match self.values.keys().find(|k| !used.contains(*k)) {
            Some(k) => Err(ConfigError::new(k.clone(), "unknown field")),
            None => Ok(()),
        }
    }

    pub fn resolved(&self) -> BTreeMap<String, Value> {
        self.resolved.borrow().clone()
    }
}
