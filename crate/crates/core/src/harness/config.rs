//! Flat `key = value` configuration with `[section]` headers.
//!
//! Blank lines and lines starting with `#` are ignored; keys before the first header
//! belong to the top-level section `""`. Values are raw strings parsed on access, and
//! parse failures report the line and the `section.key` they came from.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
struct Entry {
    value: String,
    /// Zero for values set programmatically.
    line: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<(String, String), Entry>,
}

fn full_key(section: &str, key: &str) -> String {
    if section.is_empty() {
        key.to_string()
    } else {
        format!("{section}.{key}")
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let mut cfg = Config::default();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            if let Some(rest) = s.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| Error::Config {
                    line,
                    key: s.to_string(),
                    msg: "unterminated section header".into(),
                })?;
                let name = name.trim();
                if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                    return Err(Error::Config { line, key: name.to_string(), msg: "invalid section name".into() });
                }
                section = name.to_string();
                continue;
            }
            let (k, v) = s.split_once('=').ok_or_else(|| Error::Config {
                line,
                key: s.to_string(),
                msg: "expected `key = value`".into(),
            })?;
            let k = k.trim();
            // Trailing comments are allowed after whitespace.
            let v = match v.find(" #") {
                Some(p) => &v[..p],
                None => v,
            }
            .trim();
            if k.is_empty() || !k.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(Error::Config { line, key: full_key(&section, k), msg: "invalid key".into() });
            }
            let id = (section.clone(), k.to_string());
            if let Some(prev) = cfg.entries.get(&id) {
                return Err(Error::Config {
                    line,
                    key: full_key(&section, k),
                    msg: format!("duplicate key (first set at line {})", prev.line),
                });
            }
            cfg.entries.insert(id, Entry { value: v.to_string(), line });
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Config> {
        Config::parse(&std::fs::read_to_string(path)?)
    }

    /// Sets or overrides a value.
    pub fn set(&mut self, section: &str, key: &str, value: impl Into<String>) {
        self.entries.insert((section.to_string(), key.to_string()), Entry { value: value.into(), line: 0 });
    }

    pub fn contains(&self, section: &str, key: &str) -> bool {
        self.entries.contains_key(&(section.to_string(), key.to_string()))
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.entries.get(&(section.to_string(), key.to_string())).map(|e| e.value.as_str())
    }

    fn line(&self, section: &str, key: &str) -> usize {
        self.entries.get(&(section.to_string(), key.to_string())).map(|e| e.line).unwrap_or(0)
    }

    fn error(&self, section: &str, key: &str, msg: impl Into<String>) -> Error {
        Error::Config { line: self.line(section, key), key: full_key(section, key), msg: msg.into() }
    }

    pub fn require(&self, section: &str, key: &str) -> Result<&str> {
        self.get(section, key).ok_or_else(|| self.error(section, key, "missing required key"))
    }

    fn parsed<T: std::str::FromStr>(&self, section: &str, key: &str, what: &str) -> Result<Option<T>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|_| self.error(section, key, format!("`{v}` is not {what}"))),
        }
    }

    pub fn f64_or(&self, section: &str, key: &str, default: f64) -> Result<f64> {
        let v = self.parsed::<f64>(section, key, "a number")?.unwrap_or(default);
        if !v.is_finite() {
            return Err(self.error(section, key, "value must be finite"));
        }
        Ok(v)
    }

    pub fn opt_f64(&self, section: &str, key: &str) -> Result<Option<f64>> {
        match self.parsed::<f64>(section, key, "a number")? {
            Some(v) if !v.is_finite() => Err(self.error(section, key, "value must be finite")),
            x => Ok(x),
        }
    }

    pub fn usize_or(&self, section: &str, key: &str, default: usize) -> Result<usize> {
        Ok(self.parsed::<usize>(section, key, "a non-negative integer")?.unwrap_or(default))
    }

    pub fn u64_or(&self, section: &str, key: &str, default: u64) -> Result<u64> {
        Ok(self.parsed::<u64>(section, key, "a non-negative integer")?.unwrap_or(default))
    }

    pub fn bool_or(&self, section: &str, key: &str, default: bool) -> Result<bool> {
        match self.get(section, key) {
            None => Ok(default),
            Some("true" | "yes" | "1") => Ok(true),
            Some("false" | "no" | "0") => Ok(false),
            Some(v) => Err(self.error(section, key, format!("`{v}` is not a boolean"))),
        }
    }

    pub fn str_or<'a>(&'a self, section: &str, key: &str, default: &'a str) -> &'a str {
        self.get(section, key).unwrap_or(default)
    }

    /// Comma-separated numbers.
    pub fn list_or(&self, section: &str, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.get(section, key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|x| x.trim().parse::<f64>().ok().filter(|y| y.is_finite()))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| self.error(section, key, format!("`{v}` is not a list of finite numbers"))),
        }
    }

    pub fn vec3_or(&self, section: &str, key: &str, default: [f64; 3]) -> Result<[f64; 3]> {
        let v = self.list_or(section, key, &default)?;
        <[f64; 3]>::try_from(v.as_slice())
            .map_err(|_| self.error(section, key, "expected three comma-separated numbers"))
    }

    /// Rejects keys of `section` outside `allowed`.
    pub fn check_keys(&self, section: &str, allowed: &[&str]) -> Result<()> {
        for ((s, k), e) in &self.entries {
            if s == section && !allowed.contains(&k.as_str()) {
                return Err(Error::Config { line: e.line, key: full_key(s, k), msg: "unknown key".into() });
            }
        }
        Ok(())
    }

    /// Rejects sections outside `allowed`.
    pub fn check_sections(&self, allowed: &[&str]) -> Result<()> {
        for ((s, k), e) in &self.entries {
            if !allowed.contains(&s.as_str()) {
                return Err(Error::Config { line: e.line, key: full_key(s, k), msg: format!("unknown section `{s}`") });
            }
        }
        Ok(())
    }

    /// All entries as `section.key -> value`, for manifests.
    pub fn echo(&self) -> BTreeMap<String, String> {
        self.entries.iter().map(|((s, k), e)| (full_key(s, k), e.value.clone())).collect()
    }

    /// Serializes back to the text format, sections in sorted order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut current: Option<&str> = None;
        for ((s, k), e) in &self.entries {
            if current != Some(s.as_str()) {
                if !s.is_empty() {
                    out.push_str(&format!("\n[{s}]\n"));
                }
                current = Some(s);
            }
            out.push_str(&format!("{k} = {}\n", e.value));
        }
        out
    }
}
