//! Flat `key = value` scenario files.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub value: String,
    /// 1-based source line; 0 for values set from the command line.
    pub line: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, Entry>,
    last_line: usize,
}

impl RawConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            cfg.last_line = line;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return Err(CliError::parse(line, format!("expected `key = value`, got `{body}`")));
            };
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(CliError::parse(line, format!("invalid key `{key}`")));
            }
            if value.is_empty() {
                return Err(CliError::parse(line, format!("key `{key}` has no value")));
            }
            if cfg.entries.contains_key(key) {
                return Err(CliError::parse(line, format!("duplicate key `{key}`")));
            }
            cfg.entries.insert(key.to_string(), Entry { value: value.to_string(), line });
        }
        Ok(cfg)
    }

    /// Applies a command-line override `key=value`.
    pub fn set(&mut self, assignment: &str) -> CliResult<()> {
        let Some((key, value)) = assignment.split_once('=') else {
            return Err(CliError::parse(None, format!("--set expects key=value, got `{assignment}`")));
        };
        self.entries.insert(
            key.trim().to_string(),
            Entry {
                value: value.trim().to_string(),
                line: 0,
            },
        );
        Ok(())
    }

    pub fn keys(&self) -> impl Iterator<Item = (&str, &Entry)> {
        self.entries.iter().map(|(k, e)| (k.as_str(), e))
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&Entry> {
        self.entries.get(key)
    }

    fn line_of(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|e| e.line).filter(|&l| l > 0)
    }

    pub fn require_str(&self, key: &str) -> CliResult<&str> {
        self.entries
            .get(key)
            .map(|e| e.value.as_str())
            .ok_or_else(|| CliError::parse(Some(self.last_line.max(1)), format!("missing required key `{key}`")))
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.entries.get(key).map_or(default, |e| e.value.as_str())
    }

    fn convert<T: FromStr>(&self, key: &str, text: &str) -> CliResult<T> {
        text.trim()
            .parse()
            .map_err(|_| CliError::parse(self.line_of(key), format!("key `{key}`: cannot parse `{text}`")))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> CliResult<T> {
        let text = self.require_str(key)?;
        self.convert(key, text)
    }

    pub fn optional<T: FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        self.entries.get(key).map(|e| self.convert(key, &e.value)).transpose()
    }

    pub fn or<T: FromStr>(&self, key: &str, default: T) -> CliResult<T> {
        Ok(self.optional(key)?.unwrap_or(default))
    }

    pub fn list<T: FromStr>(&self, key: &str) -> CliResult<Option<Vec<T>>> {
        self.entries
            .get(key)
            .map(|e| e.value.split(',').map(|item| self.convert(key, item)).collect())
            .transpose()
    }

    pub fn require_list<T: FromStr>(&self, key: &str) -> CliResult<Vec<T>> {
        self.require_str(key)?;
        Ok(self.list(key)?.unwrap_or_default())
    }

    /// Rejects any key not in `known`.
    pub fn check_known(&self, known: &[&str]) -> CliResult<()> {
        for (key, entry) in &self.entries {
            if !known.contains(&key.as_str()) {
                return Err(CliError::parse(
                    (entry.line > 0).then_some(entry.line),
                    format!("unknown key `{key}`"),
                ));
            }
        }
        Ok(())
    }

    /// Canonical text form, one key per line in sorted order.
    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, e)| format!("{k} = {}\n", e.value)).collect()
    }
}
