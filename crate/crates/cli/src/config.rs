//! Flat `key = value` run files.
//!
//! One setting per line, `#` starts a comment, keys are the long flag names
//! with underscores (`n_total`, `g_x`, ...). List-valued settings take
//! comma-separated values. A flag given on the command line replaces the
//! file's value for that key.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::CliError;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigFile {
    source: Option<PathBuf>,
    entries: BTreeMap<String, (usize, String)>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::Invalid(format!("config {}: {e}", path.display())))?;
        let mut config = Self::parse(&text).map_err(|e| match e {
            CliError::Invalid(msg) => CliError::Invalid(format!("config {}: {msg}", path.display())),
            other => other,
        })?;
        config.source = Some(path.to_path_buf());
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (index, raw) in text.lines().enumerate() {
            let line_no = index + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Invalid(format!("line {line_no}: expected key = value")));
            };
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(CliError::Invalid(format!("line {line_no}: empty key")));
            }
            if let Some((first, _)) = entries.insert(key.clone(), (line_no, value.trim().to_string())) {
                return Err(CliError::Invalid(format!(
                    "line {line_no}: {key} already set on line {first}"
                )));
            }
        }
        Ok(Self { source: None, entries })
    }

    /// Fails on the first key outside `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<(), CliError> {
        match self.entries.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            Some((key, (line, _))) => Err(CliError::Invalid(format!(
                "{}unknown key '{key}' on line {line} (expected one of: {})",
                self.prefix(),
                allowed.join(", ")
            ))),
            None => Ok(()),
        }
    }

    pub fn value<T>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.entries.get(key).map(|(_, raw)| parse_value(key, raw)).transpose()
    }

    pub fn list<T>(&self, key: &str) -> Result<Option<Vec<T>>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.entries
            .get(key)
            .map(|(_, raw)| raw.split(',').map(|item| parse_value(key, item.trim())).collect())
            .transpose()
    }

    fn prefix(&self) -> String {
        self.source
            .as_ref()
            .map(|p| format!("config {}: ", p.display()))
            .unwrap_or_default()
    }
}

fn parse_value<T>(key: &str, raw: &str) -> Result<T, CliError>
where
    T: FromStr,
    T::Err: Display,
{
    raw.parse()
        .map_err(|e| CliError::Invalid(format!("{key}: cannot parse '{raw}': {e}")))
}

/// Flag, else file, else default.
pub fn pick<T>(flag: Option<T>, file: &ConfigFile, key: &str, default: T) -> Result<T, CliError>
where
    T: FromStr,
    T::Err: Display,
{
    match flag {
        Some(v) => Ok(v),
        None => Ok(file.value(key)?.unwrap_or(default)),
    }
}

/// List version of [`pick`]; an empty flag list counts as not given.
pub fn pick_list<T>(flag: Vec<T>, file: &ConfigFile, key: &str, default: &[T]) -> Result<Vec<T>, CliError>
where
    T: FromStr + Clone,
    T::Err: Display,
{
    if !flag.is_empty() {
        return Ok(flag);
    }
    Ok(file.list(key)?.unwrap_or_else(|| default.to_vec()))
}
