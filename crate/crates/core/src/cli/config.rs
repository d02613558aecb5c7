//! Flat `key = value` configuration files. Command-line flags override file
//! entries; both override built-in defaults.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Entries of a config file, consumed key by key while a subcommand resolves
/// its settings.
#[derive(Clone, Debug, Default)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Blank lines and lines starting with `#` are ignored. Keys may use
    /// dashes or underscores.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (number, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("config line {}: expected key = value", number + 1)))?;
            let key = normalize(key.trim());
            if entries.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(Error::InvalidArgument(format!("config key {key:?} given twice")));
            }
        }
        Ok(Self { entries })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    /// Flag value, else file value, else `default`.
    pub fn pick<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.pick_opt(key, flag)?.unwrap_or(default))
    }

    pub fn pick_opt<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        let from_file = self.take(key);
        if flag.is_some() {
            return Ok(flag);
        }
        from_file
            .map(|raw| raw.parse().map_err(|e| Error::InvalidArgument(format!("config key {key}: {e}"))))
            .transpose()
    }

    /// Comma-separated list.
    pub fn pick_list<T>(&mut self, key: &str, flag: Option<String>, default: &str) -> Result<Vec<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        let raw = self.pick(key, flag, default.to_string())?;
        parse_list(key, &raw)
    }

    /// Fails on any entry no subcommand setting consumed.
    pub fn finish(self) -> Result<()> {
        match self.entries.keys().next() {
            None => Ok(()),
            Some(key) => Err(Error::InvalidArgument(format!("unknown config key {key:?}"))),
        }
    }
}

fn normalize(key: &str) -> String {
    key.replace('-', "_")
}

pub fn parse_list<T>(key: &str, raw: &str) -> Result<Vec<T>>
where
    T: FromStr,
    T::Err: Display,
{
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|e| Error::InvalidArgument(format!("{key}: {s:?}: {e}"))))
        .collect()
}

/// First 16 hex digits of the SHA-256 of the crate version, the subcommand
/// and the JSON form of its resolved settings.
pub fn config_hash<S: Serialize>(subcommand: &str, settings: &S) -> Result<String> {
    let mut hasher = Sha256::new();
    hasher.update(env!("CARGO_PKG_VERSION").as_bytes());
    hasher.update(b"\n");
    hasher.update(subcommand.as_bytes());
    hasher.update(b"\n");
    hasher.update(serde_json::to_string(settings)?.as_bytes());
    let digest = hasher.finalize();
    Ok(digest.iter().take(8).map(|b| format!("{b:02x}")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_entries() {
        let mut file = ConfigFile::parse("# comment\nd = 3\ngrid-n=64\n\nseed = 9\n").unwrap();
        assert_eq!(file.pick("d", Some(1usize), 2).unwrap(), 1);
        assert_eq!(file.pick("grid_n", None, 16usize).unwrap(), 64);
        assert_eq!(file.pick("missing", None, 0.5f64).unwrap(), 0.5);
        assert!(file.clone().finish().is_err());
        assert_eq!(file.pick("seed", None, 0u64).unwrap(), 9);
        file.finish().unwrap();
    }

    #[test]
    fn malformed_entries_are_rejected() {
        assert!(ConfigFile::parse("d 3").is_err());
        assert!(ConfigFile::parse("d=1\nd=2").is_err());
        let mut file = ConfigFile::parse("d = three").unwrap();
        assert!(file.pick("d", None, 1usize).is_err());
    }

    #[test]
    fn lists_parse() {
        let mut file = ConfigFile::parse("n_values = 10, 20,40").unwrap();
        assert_eq!(file.pick_list::<usize>("n_values", None, "1").unwrap(), vec![10, 20, 40]);
        assert_eq!(parse_list::<f64>("x", "").unwrap(), Vec::<f64>::new());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = config_hash("scan", &(1, 2.5)).unwrap();
        assert_eq!(a.len(), 16);
        assert_eq!(a, config_hash("scan", &(1, 2.5)).unwrap());
        assert_ne!(a, config_hash("scan", &(1, 2.6)).unwrap());
        assert_ne!(a, config_hash("verify", &(1, 2.5)).unwrap());
    }
}
