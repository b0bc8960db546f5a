//! Flat `key=value` configuration text.
//!
//! One assignment per line, dotted keys, `#` starts a comment. Later
//! assignments win, so command-line overrides are simply appended.
//!
//! ```text
//! # slower perturbation
//! delay.frequency = 0.5
//! sim.t_end = 20
//! ```

use std::path::Path;

use crate::error::{Result, WorkbenchError};

/// Ordered assignments; a key may repeat and the last one wins.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Overrides {
    entries: Vec<(String, String)>,
}

impl Overrides {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Self::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            out.push_assignment(line)
                .map_err(|e| WorkbenchError::Config(format!("line {}: {e}", no + 1)))?;
        }
        Ok(out)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| WorkbenchError::io(path, e))?;
        Self::parse(&text).map_err(|e| WorkbenchError::Config(format!("{}: {e}", path.display())))
    }

    /// Append one `key=value` assignment.
    pub fn push_assignment(&mut self, text: &str) -> Result<()> {
        let (k, v) = text
            .split_once('=')
            .ok_or_else(|| WorkbenchError::Config(format!("expected key=value, got `{text}`")))?;
        let (k, v) = (k.trim(), v.trim());
        let valid = !k.is_empty()
            && k.split('.')
                .all(|part| !part.is_empty() && part.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'));
        if !valid {
            return Err(WorkbenchError::Config(format!("malformed key `{k}`")));
        }
        if v.is_empty() {
            return Err(WorkbenchError::Config(format!("missing value for `{k}`")));
        }
        self.entries.push((k.to_string(), v.to_string()));
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn extend(&mut self, other: &Overrides) {
        self.entries.extend(other.entries.iter().cloned());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub(crate) fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| WorkbenchError::Config(format!("`{key}` needs a finite number, got `{value}`")))
}
