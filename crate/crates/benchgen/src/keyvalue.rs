//! Flat `key=value` text used for specs, certificates and manifests.

use std::fmt::Display;
use std::fs;
use std::path::Path;

use oracle_core::{OptError, Result};

/// Ordered key/value pairs. Later `set` calls overwrite in place.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: Vec<(String, String)>,
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

impl KeyValues {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses `key=value` lines; `#` starts a comment, blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = Self::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| OptError::InvalidParameter(format!("line {}: expected key=value, got {line:?}", ln + 1)))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(OptError::InvalidParameter(format!("line {}: empty key", ln + 1)));
            }
            if kv.get(k).is_some() {
                return Err(OptError::InvalidParameter(format!("key {k:?} given twice")));
            }
            kv.entries.push((k.to_string(), v.trim().to_string()));
        }
        Ok(kv)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| OptError::InvalidParameter(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_string()).map_err(|e| OptError::InvalidParameter(format!("{}: {e}", path.display())))
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn set_f64(&mut self, key: &str, value: f64) {
        self.set(key, fmt_f64(value));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| OptError::InvalidParameter(format!("missing key {key:?}")))
    }

    pub fn get_parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| OptError::InvalidParameter(format!("key {key:?}: cannot parse {v:?}"))),
        }
    }

    pub fn require_parsed<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.get_parsed(key)?.ok_or_else(|| OptError::InvalidParameter(format!("missing key {key:?}")))
    }

    /// Comma-separated numbers.
    pub fn get_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map(Some)
                .map_err(|_| OptError::InvalidParameter(format!("key {key:?}: cannot parse list {v:?}"))),
        }
    }

    /// Fails on the first key not in `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        match self.entries.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            Some((k, _)) => Err(OptError::InvalidParameter(format!("unknown key {k:?}"))),
            None => Ok(()),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Display for KeyValues {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_errors() {
        let mut kv = KeyValues::new();
        kv.set("law", "powerlaw");
        kv.set_f64("mu", 0.1);
        kv.set("d", 10);
        kv.set("d", 12);
        let back = KeyValues::parse(&kv.to_string()).unwrap();
        assert_eq!(back, kv);
        assert_eq!(back.require_parsed::<f64>("mu").unwrap(), 0.1);
        assert_eq!(back.require_parsed::<usize>("d").unwrap(), 12);
        assert!(back.check_keys(&["law", "mu"]).unwrap_err().to_string().contains("\"d\""));
        assert!(KeyValues::parse("a=1\na=2").is_err());
        assert!(KeyValues::parse("novalue").is_err());
        assert_eq!(KeyValues::parse("x = 1, 2.5 # note").unwrap().get_list("x").unwrap(), Some(vec![1.0, 2.5]));
    }
}
