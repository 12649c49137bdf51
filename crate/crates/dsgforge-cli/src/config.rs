//! TOML file configuration. Every key mirrors a command-line flag and
//! flags always win; the file only fills gaps. Credentials are never read
//! from the file: the http backend takes DSGFORGE_API_BASE and
//! DSGFORGE_API_KEY from the environment.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    // Single-run settings.
    pub model: Option<String>,
    pub system: Option<String>,
    pub temperature: Option<f64>,
    pub seed: Option<u64>,
    // Shared settings.
    pub cdc: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub backend: Option<String>,
    pub scripts: Option<PathBuf>,
    pub interpreter: Option<String>,
    pub exec_timeout_secs: Option<u64>,
    pub parallelism: Option<usize>,
    pub recursion_limit: Option<u32>,
    pub max_completion_tokens: Option<u32>,
    // Matrix axes.
    pub models: Option<Vec<String>>,
    pub systems: Option<Vec<String>>,
    pub temperatures: Option<Vec<f64>>,
    pub seeds: Option<Vec<u64>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("could not read config file {}", path.display()))?;
        toml::from_str(&text)
            .with_context(|| format!("{} is not a valid config file", path.display()))
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(path) => Self::load(path),
            None => Ok(Self::default()),
        }
    }

    /// Field-by-field override: `self` wins wherever it has a value.
    pub fn merged_over(self, base: FileConfig) -> FileConfig {
        FileConfig {
            model: self.model.or(base.model),
            system: self.system.or(base.system),
            temperature: self.temperature.or(base.temperature),
            seed: self.seed.or(base.seed),
            cdc: self.cdc.or(base.cdc),
            out: self.out.or(base.out),
            backend: self.backend.or(base.backend),
            scripts: self.scripts.or(base.scripts),
            interpreter: self.interpreter.or(base.interpreter),
            exec_timeout_secs: self.exec_timeout_secs.or(base.exec_timeout_secs),
            parallelism: self.parallelism.or(base.parallelism),
            recursion_limit: self.recursion_limit.or(base.recursion_limit),
            max_completion_tokens: self.max_completion_tokens.or(base.max_completion_tokens),
            models: self.models.or(base.models),
            systems: self.systems.or(base.systems),
            temperatures: self.temperatures.or(base.temperatures),
            seeds: self.seeds.or(base.seeds),
        }
    }
}
