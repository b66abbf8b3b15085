//! Plain-text artifact helpers: configuration hashes and CSV tables.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Hex SHA-256 (first 16 bytes) of the TOML serialization of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let text = toml::to_string(value).unwrap_or_else(|e| format!("unserializable: {e}"));
    let digest = Sha256::digest(text.as_bytes());
    digest[..16].iter().map(|b| format!("{b:02x}")).collect()
}

/// A column-oriented numeric table.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, column: Vec<f64>) -> &mut Self {
        self.names.push(name.into());
        self.columns.push(column);
        self
    }

    pub fn to_csv(&self, config_hash: &str) -> String {
        let mut s = format!("# config_hash={config_hash}\n");
        s.push_str(&self.names.join(","));
        s.push('\n');
        let rows = self.columns.iter().map(Vec::len).max().unwrap_or(0);
        for i in 0..rows {
            for (j, c) in self.columns.iter().enumerate() {
                if j > 0 {
                    s.push(',');
                }
                if let Some(v) = c.get(i) {
                    write!(s, "{v:.10e}").unwrap();
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: &Path, config_hash: &str) -> Result<()> {
        std::fs::write(path, self.to_csv(config_hash)).map_err(|e| Error::io(path, e))
    }
}

/// Parse a CSV written by [`Table::to_csv`]. Returns the hash and the table.
pub fn read_csv(text: &str) -> Result<(String, Table)> {
    let mut lines = text.lines();
    let hash = lines
        .next()
        .and_then(|l| l.strip_prefix("# config_hash="))
        .ok_or_else(|| Error::Format("missing config_hash header".into()))?
        .to_string();
    let names: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Format("missing column header".into()))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut columns = vec![Vec::new(); names.len()];
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        for (j, field) in line.split(',').enumerate().take(names.len()) {
            if field.is_empty() {
                continue;
            }
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("bad number {field:?} on data row {}", lineno + 1)))?;
            columns[j].push(v);
        }
    }
    Ok((hash, Table { names, columns }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let mut t = Table::new();
        t.push("frequency_hz", vec![1.0, 2.0]).push("value", vec![0.5, 1e-30]);
        let text = t.to_csv("abc");
        assert!(text.starts_with("# config_hash=abc\nfrequency_hz,value\n"));
        let (h, back) = read_csv(&text).unwrap();
        assert_eq!(h, "abc");
        assert_eq!(back.columns, t.columns);
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = crate::SystemParams::reference();
        let mut b = a;
        assert_eq!(config_hash(&a), config_hash(&b));
        b.mech.mass *= 1.0 + 1e-12;
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 32);
    }
}
