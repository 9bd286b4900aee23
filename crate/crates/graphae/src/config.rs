//! Experiment description, read from and written to TOML.

use std::path::{Path, PathBuf};

use graphae_core::metrics::MetricConfig;
use graphae_core::model::{BaselineConfig, ModelConfig};
use graphae_core::nn::{AdamConfig, LrSchedule};
use graphae_core::shapes::ShapeConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    SelfSupervised,
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    /// Dataset directory (holding `manifest.jsonl`).
    pub dir: PathBuf,
    /// Used by `gen-data` when the directory does not exist yet.
    pub n_samples: usize,
    pub seed: u64,
    pub shape: ShapeConfig,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            dir: PathBuf::from("data/shapes"),
            n_samples: 50_000,
            seed: 0,
            shape: ShapeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub batch_size: usize,
    #[serde(flatten)]
    pub adam: AdamConfig,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            batch_size: 128,
            adam: AdamConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// First seed; `run_seeds` uses `seed..seed + n_seeds`.
    pub seed: u64,
    pub n_seeds: usize,
    pub mode: RunMode,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub baseline: BaselineConfig,
    pub optimizer: OptimizerConfig,
    /// Defaults to the schedule of the configured mode when absent.
    pub schedule: Option<LrSchedule>,
    pub metrics: MetricConfig,
    /// Cap on validation samples scored after every epoch (all when absent).
    pub val_samples: Option<usize>,
    /// Cap on training samples per epoch (all when absent).
    pub train_samples: Option<usize>,
    pub eval_batch_size: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            n_seeds: 10,
            mode: RunMode::SelfSupervised,
            data: DataConfig::default(),
            model: ModelConfig::default(),
            baseline: BaselineConfig::default(),
            optimizer: OptimizerConfig::default(),
            schedule: None,
            metrics: MetricConfig::default(),
            val_samples: None,
            train_samples: None,
            eval_batch_size: 32,
        }
    }
}

impl ExperimentConfig {
    pub fn schedule(&self) -> LrSchedule {
        self.schedule.unwrap_or(match self.mode {
            RunMode::SelfSupervised => LrSchedule::self_supervised(),
            RunMode::Baseline => LrSchedule::baseline(),
        })
    }

    pub fn n_max(&self) -> usize {
        self.model.encoder.n_max
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Error::Core(graphae_core::Error::Config(m));
        if self.optimizer.batch_size == 0 || self.eval_batch_size == 0 {
            return Err(bad("batch sizes must be positive".into()));
        }
        if self.n_seeds == 0 {
            return Err(bad("n_seeds must be positive".into()));
        }
        let s = self.schedule();
        if s.epochs == 0 {
            return Err(bad("schedule.epochs must be positive".into()));
        }
        if self.data.shape.canvas_size != self.model.encoder.image_size {
            return Err(bad(format!(
                "data canvas {} differs from model image size {}",
                self.data.shape.canvas_size, self.model.encoder.image_size
            )));
        }
        self.model.validate()?;
        Ok(())
    }

    pub fn from_toml(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        let cfg = Self::from_toml(&text).map_err(|e| Error::format(path, e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always representable as TOML")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()).map_err(Error::io(path))
    }
}
