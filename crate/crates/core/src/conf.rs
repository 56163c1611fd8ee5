//! Flat `key: value` text used by the generated configuration files.
//!
//! One entry per line; `#` starts a comment line; blank lines are ignored. Keys
//! are dotted paths and may not repeat. Values run to the end of the line and are
//! trimmed. Lists are comma-separated.

use std::fmt::Write;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfError {
    #[error("line {line}: expected `key: value`")]
    Syntax { line: usize },
    #[error("line {line}: key `{key}` appears more than once")]
    DuplicateKey { key: String, line: usize },
    #[error("missing key `{0}`")]
    Missing(String),
    #[error("key `{key}`: cannot parse `{value}`")]
    Invalid { key: String, value: String },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfDoc {
    entries: Vec<(String, String)>,
}

impl ConfDoc {
    pub fn parse(text: &str) -> Result<ConfDoc, ConfError> {
        let mut doc = ConfDoc::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once(':').ok_or(ConfError::Syntax { line: i + 1 })?;
            let k = k.trim();
            if k.is_empty() || k.contains(char::is_whitespace) {
                return Err(ConfError::Syntax { line: i + 1 });
            }
            if doc.get(k).is_some() {
                return Err(ConfError::DuplicateKey {
                    key: k.to_string(),
                    line: i + 1,
                });
            }
            doc.entries.push((k.to_string(), v.trim().to_string()));
        }
        Ok(doc)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str, ConfError> {
        self.get(key).ok_or_else(|| ConfError::Missing(key.to_string()))
    }

    pub fn parse_value<T: FromStr>(&self, key: &str) -> Result<T, ConfError> {
        let v = self.require(key)?;
        v.parse().map_err(|_| ConfError::Invalid {
            key: key.to_string(),
            value: v.to_string(),
        })
    }

    pub fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfError> {
        match self.get(key) {
            None => Ok(default),
            Some(_) => self.parse_value(key),
        }
    }

    pub fn list(&self, key: &str) -> Vec<String> {
        self.get(key).map(split_list).unwrap_or_default()
    }

    pub fn parse_list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, ConfError> {
        self.list(key)
            .into_iter()
            .map(|v| {
                v.parse().map_err(|_| ConfError::Invalid {
                    key: key.to_string(),
                    value: v.clone(),
                })
            })
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Entries under `prefix.`, with the prefix stripped.
    pub fn section<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = (&'a str, &'a str)> + 'a {
        self.iter().filter_map(move |(k, v)| {
            k.strip_prefix(prefix)
                .and_then(|rest| rest.strip_prefix('.'))
                .map(|rest| (rest, v))
        })
    }
}

pub fn split_list(v: &str) -> Vec<String> {
    v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

/// Builds conf text line by line.
#[derive(Default)]
pub struct ConfWriter {
    out: String,
}

impl ConfWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn comment(&mut self, text: &str) -> &mut Self {
        for l in text.lines() {
            writeln!(self.out, "# {l}").unwrap();
        }
        self
    }

    pub fn blank(&mut self) -> &mut Self {
        self.out.push('\n');
        self
    }

    pub fn entry(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        writeln!(self.out, "{key}: {value}").unwrap();
        self
    }

    pub fn list<T: std::fmt::Display>(&mut self, key: &str, values: &[T]) -> &mut Self {
        let v: Vec<String> = values.iter().map(|x| x.to_string()).collect();
        self.entry(key, v.join(", "))
    }

    pub fn finish(&mut self) -> String {
        std::mem::take(&mut self.out)
    }
}
