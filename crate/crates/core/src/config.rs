//! Full experiment specification, persisted with every run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::a3c::TrainerConfig;
use crate::env::PhysicsConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub physics: PhysicsConfig,
    #[serde(default)]
    pub trainer: TrainerConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
}

fn default_workers() -> usize {
    8
}

fn default_episodes() -> usize {
    8000
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn new(physics: PhysicsConfig) -> Self {
        Self {
            physics,
            trainer: TrainerConfig::default(),
            seed: 0,
            workers: default_workers(),
            episodes: default_episodes(),
            out_dir: default_out(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_episodes(mut self, episodes: usize) -> Self {
        self.episodes = episodes;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.physics.validate()?;
        self.trainer.validate()?;
        if self.workers == 0 {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        if self.episodes == 0 {
            return Err(Error::InvalidConfig("episodes must be at least 1".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_json()?.as_bytes())
    }
}
