//! Effective run configurations. Each one can be written as TOML and fed
//! back through `--config`; flags given on the command line win over the
//! file, and the file wins over built-in defaults.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use infogather::sensor::SensorConfig;
use infogather::utility::ProblemSpec;
use infogather::worldgen::{CellEncoding, GenConfig, Generator, DEFAULT_DIMS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldgenConfig {
    pub seed: u64,
    /// Worlds in the train and test splits.
    pub count: usize,
    pub validation_count: usize,
    pub splits: Vec<String>,
    pub format: CellEncoding,
    pub world: GenConfig,
}

impl Default for WorldgenConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            count: 100,
            validation_count: 20,
            splits: vec!["train".into(), "test".into(), "validation".into()],
            format: CellEncoding::Json,
            world: GenConfig::new(
                DEFAULT_DIMS,
                Generator::by_name("parallel-lines").expect("built-in generator"),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub seed: u64,
    pub spec: ProblemSpec,
    /// `None` takes the sensor stored in the first learnt model, or the
    /// default sensor when no model is evaluated.
    pub sensor: Option<SensorConfig>,
    pub policies: Vec<String>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            spec: ProblemSpec::unconstrained(30),
            sensor: None,
            policies: Vec::new(),
        }
    }
}

/// Parses a TOML config file strictly; unknown keys are errors.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).map_err(|e| anyhow::Error::new(ConfigError(format!("{}: {e}", path.display()))))
}

pub fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    Ok(toml::to_string(value)?)
}

/// A malformed or contradictory configuration; exits with the usage code.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(ConfigError(msg.into()))
}
