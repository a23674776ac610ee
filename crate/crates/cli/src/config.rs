//! Flat key = value configuration files.
//!
//! The format is line-oriented: `key = value` pairs, `#` comments, and
//! `[section]` headers named after experiment tags. Keys before any section
//! are global; keys in the section matching the requested experiment
//! override them. See `docs/config-format.md` for the grammar.

use std::collections::BTreeMap;
use std::path::Path;

use infocap_core::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct Config {
    global: BTreeMap<String, String>,
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let mut config = Config::default();
        let mut current: Option<String> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
                let name = name.trim().to_string();
                if name.is_empty() {
                    return Err(Error::config(format!("line {}: empty section name", lineno + 1)));
                }
                config.sections.entry(name.clone()).or_default();
                current = Some(name);
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::config(format!(
                    "line {}: expected `key = value`, got `{line}`",
                    lineno + 1
                )));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(Error::config(format!("line {}: empty key", lineno + 1)));
            }
            let target = match &current {
                None => &mut config.global,
                Some(section) => config.sections.get_mut(section).expect("section created"),
            };
            if target.insert(key.clone(), value).is_some() {
                return Err(Error::config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// View of the config for one experiment: section keys shadow globals.
    pub fn scoped(&self, experiment: &str) -> Scoped<'_> {
        Scoped {
            config: self,
            section: experiment.to_string(),
        }
    }
}

pub struct Scoped<'a> {
    config: &'a Config,
    section: String,
}

impl Scoped<'_> {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.config
            .sections
            .get(&self.section)
            .and_then(|s| s.get(key))
            .or_else(|| self.config.global.get(key))
            .map(|s| s.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::config(format!("missing required key `{key}`")))
    }

    pub fn get_usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::config(format!("key `{key}`: expected integer, got `{v}`"))),
        }
    }

    pub fn get_f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::config(format!("key `{key}`: expected number, got `{v}`"))),
        }
    }

    pub fn get_str<'s>(&'s self, key: &str, default: &'s str) -> &'s str {
        self.get(key).unwrap_or(default)
    }

    pub fn list(&self, key: &str) -> Option<Vec<String>> {
        self.get(key).map(|v| {
            v.split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect()
        })
    }

    pub fn list_f64(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.list(key) {
            None => Ok(None),
            Some(items) => items
                .iter()
                .map(|s| {
                    s.parse()
                        .map_err(|_| Error::config(format!("key `{key}`: bad number `{s}`")))
                })
                .collect::<Result<Vec<f64>>>()
                .map(Some),
        }
    }

    pub fn list_u64(&self, key: &str) -> Result<Option<Vec<u64>>> {
        match self.list(key) {
            None => Ok(None),
            Some(items) => items
                .iter()
                .map(|s| {
                    s.parse()
                        .map_err(|_| Error::config(format!("key `{key}`: bad integer `{s}`")))
                })
                .collect::<Result<Vec<u64>>>()
                .map(Some),
        }
    }

    pub fn list_usize(&self, key: &str) -> Result<Option<Vec<usize>>> {
        Ok(self
            .list_u64(key)?
            .map(|v| v.into_iter().map(|x| x as usize).collect()))
    }
}
