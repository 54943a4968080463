//! Plain `key = value` run files.
//!
//! ```text
//! # comment
//! seed = 7
//! group = s1r2
//! n-traj = 64
//! ```
//!
//! Keys are the long flag names; `-` and `_` are interchangeable. One file may
//! hold the settings of every subcommand, each one reads the keys it needs.
//! A flag given on the command line wins over the file.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};

pub const KEYS: &[&str] = &[
    "seed",
    "out",
    "data",
    "weights",
    "group",
    "t_end",
    "dt",
    "n_traj",
    "radius",
    "mass",
    "spin_inertia",
    "yaw_inertia",
    "center_spread",
    "epochs",
    "lr",
    "batch_size",
    "grid_points",
    "grid_side",
    "grid_half_width",
];

#[derive(Debug, Default, Clone)]
pub struct RunFile {
    source: Option<PathBuf>,
    values: BTreeMap<String, String>,
}

fn normalize_key(key: &str) -> String {
    key.trim().replace('-', "_")
}

impl RunFile {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        let mut file = Self::parse(&text).with_context(|| format!("in config file {}", path.display()))?;
        file.source = Some(path.to_path_buf());
        Ok(file)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {}: expected `key = value`, got '{raw}'", i + 1);
            };
            let key = normalize_key(key);
            if !KEYS.contains(&key.as_str()) {
                bail!("line {}: unknown key '{key}'", i + 1);
            }
            if values.insert(key.clone(), value.trim().to_string()).is_some() {
                bail!("line {}: duplicate key '{key}'", i + 1);
            }
        }
        Ok(Self { source: None, values })
    }

    fn get<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        let Some(raw) = self.values.get(key) else {
            return Ok(None);
        };
        raw.parse().map(Some).map_err(|e| {
            let origin = self
                .source
                .as_ref()
                .map(|p| format!(" in {}", p.display()))
                .unwrap_or_default();
            anyhow::anyhow!("invalid value '{raw}' for '{key}'{origin}: {e}")
        })
    }

    /// The flag if given, else the file entry.
    pub fn pick<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }

    pub fn pick_or<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.pick(flag, key)?.unwrap_or(default))
    }

    pub fn require<T>(&self, flag: Option<T>, key: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.pick(flag, key)?
            .with_context(|| format!("missing required setting --{}", key.replace('_', "-")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_dashes() {
        let f = RunFile::parse("# run\nseed = 7\n\nt-end=5.5 # short\ngroup = se2\n").unwrap();
        assert_eq!(f.get::<u64>("seed").unwrap(), Some(7));
        assert_eq!(f.get::<f64>("t_end").unwrap(), Some(5.5));
        assert_eq!(f.get::<String>("group").unwrap().as_deref(), Some("se2"));
        assert_eq!(f.get::<f64>("dt").unwrap(), None);
    }

    #[test]
    fn flags_win() {
        let f = RunFile::parse("epochs = 10").unwrap();
        assert_eq!(f.pick(Some(3usize), "epochs").unwrap(), Some(3));
        assert_eq!(f.pick(None::<usize>, "epochs").unwrap(), Some(10));
        assert_eq!(f.pick_or(None::<usize>, "n_traj", 32).unwrap(), 32);
        assert!(f.require(None::<u64>, "seed").is_err());
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(RunFile::parse("seed 7").is_err());
        assert!(RunFile::parse("sed = 7").is_err());
        assert!(RunFile::parse("seed = 1\nseed = 2").is_err());
        let f = RunFile::parse("seed = seven").unwrap();
        assert!(f.get::<u64>("seed").is_err());
    }
}
