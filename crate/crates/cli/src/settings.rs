//! Layered settings: command-line flag > config file > environment > default.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{CliError, CliResult};

pub const CONFIG_ENV: &str = "GLIMPSE_CONFIG";

/// Contents of the `--config` TOML file. Every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub estimator: Option<String>,
    pub method: Option<String>,
    pub top_k: Option<usize>,
    pub rank_size: Option<usize>,
    pub threshold: Option<f64>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub provider_config: Option<PathBuf>,
    pub prompt_file: Option<PathBuf>,
    #[serde(default)]
    pub synth: SynthSection,
    #[serde(default)]
    pub train: TrainSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub family: Option<String>,
    pub passages: Option<usize>,
    pub length: Option<usize>,
    pub machine_sharpness: Option<f64>,
    pub human_sharpness: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub hidden: Option<usize>,
    pub epochs: Option<usize>,
    pub step_size: Option<f64>,
    pub batch_size: Option<usize>,
    pub examples: Option<usize>,
    pub family: Option<String>,
}

impl FileConfig {
    /// Load the file named by `--config`, else by `GLIMPSE_CONFIG`, else nothing.
    pub fn load(flag: Option<&Path>) -> CliResult<Self> {
        let path = match flag {
            Some(p) => p.to_path_buf(),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => PathBuf::from(p),
                _ => return Ok(Self::default()),
            },
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }
}

fn env<T: FromStr>(name: &str) -> CliResult<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match std::env::var(name) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|e| CliError::config(format!("{name}={v:?}: {e}"))),
        _ => Ok(None),
    }
}

/// Resolve one setting through the four layers.
pub fn layered<T: FromStr>(flag: Option<T>, file: Option<T>, env_name: &str) -> CliResult<Option<T>>
where
    T::Err: std::fmt::Display,
{
    if flag.is_some() {
        return Ok(flag);
    }
    if file.is_some() {
        return Ok(file);
    }
    env(env_name)
}

/// Parse a string-valued setting that came from a flag or the config file.
pub fn parse<T: FromStr>(value: Option<String>, what: &str) -> CliResult<Option<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .map(|v| v.parse().map_err(|e| CliError::config(format!("{what} {v:?}: {e}"))))
        .transpose()
}

/// As [`layered`] for settings spelled as strings in flags and the file.
pub fn layered_str<T: FromStr>(
    flag: Option<String>,
    file: Option<String>,
    env_name: &str,
    what: &str,
) -> CliResult<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match parse(flag.or(file), what)? {
        Some(v) => Ok(Some(v)),
        None => env(env_name),
    }
}
