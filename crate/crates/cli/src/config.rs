//! Run configuration: `key = value` files merged with command-line flags.
//!
//! Precedence is flag, then file, then the subcommand default. Every key a
//! subcommand reads is recorded, so the resolved configuration can be echoed
//! into its outputs and fed back through `--config`.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}:{line}: expected `key = value`")]
    Syntax { path: String, line: usize },

    #[error("{path}:{line}: duplicate key `{key}`")]
    Duplicate { path: String, line: usize, key: String },

    #[error("unknown config key `{0}`")]
    UnknownKey(String),

    #[error("bad value for `{key}`: {value:?} ({reason})")]
    BadValue { key: String, value: String, reason: String },

    #[error("`--{0}` has no effect on this subcommand")]
    UnusedFlag(&'static str),

    #[error("cannot read config file {path}: {source}")]
    Read { path: String, source: std::io::Error },
}

pub type FileValues = BTreeMap<String, String>;

pub fn parse_config_text(text: &str, path: &str) -> Result<FileValues, ConfigError> {
    let mut out = FileValues::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::Syntax { path: path.to_string(), line: i + 1 });
        };
        let key = k.trim().replace('-', "_");
        if key.is_empty() {
            return Err(ConfigError::Syntax { path: path.to_string(), line: i + 1 });
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(ConfigError::Duplicate { path: path.to_string(), line: i + 1, key });
        }
    }
    Ok(out)
}

pub fn read_config(path: &Path) -> Result<FileValues, ConfigError> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: shown.clone(), source })?;
    parse_config_text(&text, &shown)
}

/// Merges one subcommand's parameters and records what was resolved.
#[derive(Debug, Default)]
pub struct Resolver {
    file: FileValues,
    echo: BTreeMap<String, String>,
}

impl Resolver {
    pub fn new(file: FileValues) -> Self {
        Resolver { file, echo: BTreeMap::new() }
    }

    fn take_file<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: Display,
    {
        match self.file.remove(key) {
            None => Ok(None),
            Some(s) => s.parse().map(Some).map_err(|e: T::Err| ConfigError::BadValue {
                key: key.to_string(),
                value: s.clone(),
                reason: e.to_string(),
            }),
        }
    }

    /// Resolve an echoed key.
    pub fn get<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, ConfigError>
    where
        T::Err: Display,
    {
        let from_file = self.take_file(key)?;
        let v = flag.or(from_file).unwrap_or(default);
        self.echo.insert(key.to_string(), v.to_string());
        Ok(v)
    }

    /// Resolve an optional echoed key; absent values are not echoed.
    pub fn get_opt<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, ConfigError>
    where
        T::Err: Display,
    {
        let from_file = self.take_file(key)?;
        let v = flag.or(from_file);
        if let Some(x) = &v {
            self.echo.insert(key.to_string(), x.to_string());
        }
        Ok(v)
    }

    /// Resolve a key that is never echoed (thread count, output paths).
    pub fn get_quiet<T: FromStr>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, ConfigError>
    where
        T::Err: Display,
    {
        let from_file = self.take_file(key)?;
        Ok(flag.or(from_file))
    }

    /// Fail on any file key the subcommand did not read.
    pub fn finish(self) -> Result<RunConfig, ConfigError> {
        if let Some(k) = self.file.into_keys().next() {
            return Err(ConfigError::UnknownKey(k));
        }
        Ok(RunConfig { values: self.echo })
    }
}

/// The fully resolved parameters of one run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    pub values: BTreeMap<String, String>,
}

impl RunConfig {
    /// `key = value` lines, sorted by key; valid `--config` input.
    pub fn to_text(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Object(self.values.iter().map(|(k, v)| (k.clone(), v.clone().into())).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blank_lines() {
        let v = parse_config_text("# top\n\nsteps = 100  # trailing\nq-max=8\n", "x").unwrap();
        assert_eq!(v.get("steps").map(String::as_str), Some("100"));
        assert_eq!(v.get("q_max").map(String::as_str), Some("8"));
        assert_eq!(v.len(), 2);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(matches!(parse_config_text("steps 100", "x"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(parse_config_text("= 3", "x"), Err(ConfigError::Syntax { .. })));
        assert!(matches!(parse_config_text("a = 1\na = 2", "x"), Err(ConfigError::Duplicate { line: 2, .. })));
    }

    #[test]
    fn flag_beats_file_beats_default() {
        let file = parse_config_text("steps = 5\nseed = 9", "x").unwrap();
        let mut r = Resolver::new(file);
        assert_eq!(r.get("steps", Some(7u64), 1).unwrap(), 7);
        assert_eq!(r.get("seed", None, 1u64).unwrap(), 9);
        assert_eq!(r.get("width", None, 3usize).unwrap(), 3);
        let cfg = r.finish().unwrap();
        assert_eq!(cfg.to_text(), "seed = 9\nsteps = 7\nwidth = 3\n");
    }

    #[test]
    fn unknown_and_bad_keys_are_errors() {
        let r = Resolver::new(parse_config_text("bogus = 1", "x").unwrap());
        assert!(matches!(r.finish(), Err(ConfigError::UnknownKey(k)) if k == "bogus"));
        let mut r = Resolver::new(parse_config_text("steps = many", "x").unwrap());
        assert!(matches!(r.get("steps", None, 1u64), Err(ConfigError::BadValue { .. })));
    }

    #[test]
    fn quiet_keys_are_not_echoed() {
        let mut r = Resolver::new(parse_config_text("threads = 4", "x").unwrap());
        assert_eq!(r.get_quiet::<usize>("threads", None).unwrap(), Some(4));
        assert!(r.finish().unwrap().values.is_empty());
    }
}
