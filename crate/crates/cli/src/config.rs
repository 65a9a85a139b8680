use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::CliError;

/// Every key a config file may set. Keys match the long flag names.
pub const KNOWN_KEYS: &[&str] = &[
    "arch",
    "hidden",
    "lambda",
    "conv-k",
    "conv-s",
    "pool-w",
    "pool-p",
    "train-images",
    "train-labels",
    "test-images",
    "test-labels",
    "train-limit",
    "test-limit",
    "epochs",
    "batch-size",
    "lr",
    "optimizer",
    "seed",
    "patience",
    "checkpoint",
    "out-dir",
    "layers",
    "n",
    "batch",
    "sweep",
];

/// Parses `key = value` lines. Blank lines and `#` comments are ignored;
/// underscores in keys are read as dashes.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::Usage(format!("config line {}: expected key = value", i + 1)));
        };
        let key = k.trim().replace('_', "-");
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(CliError::Usage(format!("config line {}: unknown key '{key}'", i + 1)));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

/// Merges flags over config values over defaults and records every
/// effective value for the run log.
#[derive(Debug, Default)]
pub struct Resolver {
    config: BTreeMap<String, String>,
    effective: Vec<(String, String)>,
}

impl Resolver {
    pub fn new(config: BTreeMap<String, String>) -> Self {
        Self {
            config,
            effective: Vec::new(),
        }
    }

    pub fn from_file(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::missing(path, e))?;
        Ok(Self::new(parse_config(&text)?))
    }

    fn lookup<T>(&self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.config.get(key) {
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| CliError::Usage(format!("config value for {key} ('{raw}'): {e}"))),
            None => Ok(None),
        }
    }

    fn record(&mut self, key: &str, value: String) {
        self.effective.push((key.to_string(), value));
    }

    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let v = self.lookup(key, flag)?.unwrap_or(default);
        self.record(key, v.to_string());
        Ok(v)
    }

    pub fn optional<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let v = self.lookup(key, flag)?;
        if let Some(v) = &v {
            self.record(key, v.to_string());
        }
        Ok(v)
    }

    pub fn required<T>(&mut self, key: &str, flag: Option<T>) -> Result<T, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        self.optional(key, flag)?
            .ok_or_else(|| CliError::Usage(format!("missing required --{key}")))
    }

    /// The effective values in config syntax, so a run log can be passed
    /// back through `--config`.
    pub fn render(&self, command: &str) -> String {
        let mut s = format!("# qocnn {command}\n");
        for (k, v) in &self.effective {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }
}
