//! `key = value` configuration files.
//!
//! One setting per line; blank lines and lines starting with `#` are
//! ignored. Recognized keys: `N`, `K`, `M`, `theta`, `seed`, `width`,
//! `format`, `plan`, `layout`, `jobs`, `samples`, `alpha`. Command-line flags
//! override file values, which override built-in defaults.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};

const KEYS: &[&str] = &[
    "N", "K", "M", "theta", "seed", "width", "format", "plan", "layout", "jobs", "samples", "alpha",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config file {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {}: expected key = value", i + 1);
            };
            let key = key.trim();
            if !KEYS.contains(&key) {
                bail!("line {}: unknown key {key:?}", i + 1);
            }
            if values
                .insert(key.to_string(), value.trim().to_string())
                .is_some()
            {
                bail!("line {}: {key} set twice", i + 1);
            }
        }
        Ok(ConfigFile { values })
    }

    /// Parsed value of `key`, if the file sets it.
    pub fn get<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        self.values
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| anyhow::anyhow!("config key {key}: {e}"))
            })
            .transpose()
    }

    /// `flag`, else the file's value, else `None`.
    pub fn pick<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_prefers_flags() {
        let c = ConfigFile::parse("# demo\nN = 3\n\nK=5\nformat = json\n").unwrap();
        assert_eq!(c.get::<usize>("N").unwrap(), Some(3));
        assert_eq!(c.pick(Some(2usize), "N").unwrap(), Some(2));
        assert_eq!(c.pick(None::<usize>, "K").unwrap(), Some(5));
        assert_eq!(c.pick(None::<usize>, "M").unwrap(), None);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(ConfigFile::parse("N 3").is_err());
        assert!(ConfigFile::parse("colour = red").is_err());
        assert!(ConfigFile::parse("N = 2\nN = 3").is_err());
        assert!(ConfigFile::parse("N = two")
            .unwrap()
            .get::<usize>("N")
            .is_err());
    }
}
