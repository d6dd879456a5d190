//! Flat `key = value` evaluation reports with fixed decimal formatting.

use std::fmt::Write as _;

/// Decimal places used for every floating-point value in text outputs.
pub const DECIMALS: usize = 6;

pub fn fmt_f64(v: f64) -> String {
    let s = format!("{v:.DECIMALS$}");
    // Values that round to zero print unsigned.
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_string()
    } else {
        s
    }
}

/// Ordered key-value report. Keys keep insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvReport {
    entries: Vec<(String, String)>,
}

impl KvReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num(&mut self, key: impl Into<String>, value: f64) -> &mut Self {
        self.entries.push((key.into(), fmt_f64(value)));
        self
    }

    pub fn int(&mut self, key: impl Into<String>, value: impl Into<i64>) -> &mut Self {
        self.entries.push((key.into(), value.into().to_string()));
        self
    }

    pub fn text(&mut self, key: impl Into<String>, value: impl Into<String>) -> &mut Self {
        self.entries.push((key.into(), value.into()));
        self
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}
