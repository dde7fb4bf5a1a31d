//! Session configuration, read from TOML.
//!
//! ```toml
//! workers = 4
//! history_limit = 100
//! alternatives_limit = 50
//! blob_dir = "blobs"
//! dictionary = "data/dictionary.txt"
//!
//! [print.auto_digits]
//! delay_ms = 0
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::completion::{Dictionary, DictionaryError};
use crate::execution::{KernelConfig, PrintParams, Registry, RegistryError};
use crate::prover::DEFAULT_ALTERNATIVES_LIMIT;

pub const DEFAULT_HISTORY_LIMIT: usize = 100;
pub const DEFAULT_WAIT_TIMEOUT_MS: u64 = 30_000;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("invalid configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Dictionary(#[from] DictionaryError),
}

#[derive(Clone, Debug, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    /// Worker threads; the number of processors when absent.
    pub workers: Option<usize>,
    pub history_limit: usize,
    pub alternatives_limit: usize,
    pub blob_dir: Option<PathBuf>,
    pub dictionary: Option<PathBuf>,
    /// How long `wait` blocks before giving up.
    pub wait_timeout_ms: u64,
    pub seed: Option<u64>,
    pub print: BTreeMap<String, PrintParams>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            workers: None,
            history_limit: DEFAULT_HISTORY_LIMIT,
            alternatives_limit: DEFAULT_ALTERNATIVES_LIMIT,
            blob_dir: None,
            dictionary: None,
            wait_timeout_ms: DEFAULT_WAIT_TIMEOUT_MS,
            seed: None,
            print: BTreeMap::new(),
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let config: Config = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Relative paths in the file are taken relative to its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
        let mut config = Config::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut config.blob_dir, &mut config.dictionary].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.workers == Some(0) {
            return Err(ConfigError::Invalid("workers must be at least 1".into()));
        }
        if self.history_limit == 0 {
            return Err(ConfigError::Invalid("history_limit must be at least 1".into()));
        }
        if self.alternatives_limit == 0 {
            return Err(ConfigError::Invalid("alternatives_limit must be at least 1".into()));
        }
        Ok(())
    }

    pub fn kernel(&self) -> KernelConfig {
        let mut k = KernelConfig {
            alternatives_limit: self.alternatives_limit,
            blob_dir: self.blob_dir.clone(),
            seed: self.seed,
            ..Default::default()
        };
        if let Some(w) = self.workers {
            k.workers = w;
        }
        k
    }

    /// The built-in print functions with this configuration's overrides.
    pub fn registry(&self) -> Result<Registry, ConfigError> {
        let mut r = Registry::with_builtins();
        for (name, params) in &self.print {
            r.configure(name, params)?;
        }
        Ok(r)
    }

    pub fn load_dictionary(&self) -> Result<Option<Dictionary>, ConfigError> {
        Ok(match &self.dictionary {
            Some(p) => Some(Dictionary::load(p)?),
            None => None,
        })
    }
}
