//! Experiment configuration: one TOML file describing dataset, vertical
//! partition, train/test split, crypto backend, schedules, and the
//! runtime-model inputs.
//!
//! ```toml
//! [dataset]
//! path = "data/default_credit.csv"
//! id_column = "ID"
//! label_column = "default payment next month"
//! partition = [13, 10]          # features per party; first party holds labels
//!
//! [split]
//! test_fraction = 0.3
//! seed = 42
//!
//! [crypto]
//! kind = "mock"                 # or "paillier"
//! key_bits = 1024
//! scale_bits = 40
//!
//! [train]
//! rounds = 20
//! learning_rate = 0.1
//! max_depth = 3
//!
//! [train.trees]
//! direction = "decay"           # constant | decay | growth
//! min = 2
//! max = 5
//! k = 1.0
//!
//! [train.sample_rate]
//! direction = "growth"
//! min = 0.1
//! max = 0.3
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::crypto::{BackendChoice, FixedPointCodec};
use crate::dataset::CsvSchema;
use crate::engine::TrainConfig;
use crate::error::{Error, Result};
use crate::scheduler::ScheduleSpec;
use crate::tree::split::SplitConstraints;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
    /// Sample-id column; row order is used when absent.
    #[serde(default)]
    pub id_column: Option<String>,
    /// Absent for unlabeled prediction inputs.
    #[serde(default)]
    pub label_column: Option<String>,
    /// Features per party, in column order; the first entry is the
    /// label-holding active party.
    pub partition: Vec<usize>,
}

impl DatasetConfig {
    pub fn schema(&self) -> CsvSchema {
        CsvSchema { id_column: self.id_column.clone(), label_column: self.label_column.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { test_fraction: 0.3, seed: 42 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CryptoKind {
    Mock,
    Paillier,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CryptoConfig {
    pub kind: CryptoKind,
    /// Paillier modulus size; ignored by the mock backend.
    pub key_bits: u32,
    pub scale_bits: u32,
}

impl Default for CryptoConfig {
    fn default() -> Self {
        CryptoConfig { kind: CryptoKind::Mock, key_bits: 1024, scale_bits: 40 }
    }
}

impl CryptoConfig {
    pub fn backend(&self) -> BackendChoice {
        match self.kind {
            CryptoKind::Mock => BackendChoice::Mock,
            CryptoKind::Paillier => BackendChoice::Paillier { key_bits: self.key_bits },
        }
    }

    pub fn codec(&self) -> FixedPointCodec {
        FixedPointCodec { scale_bits: self.scale_bits }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Constant,
    Decay,
    Growth,
}

/// One schedule as written in config: `{direction, min, max, k}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(default = "default_direction")]
    pub direction: Direction,
    pub min: f64,
    /// Defaults to `min` (flat schedule).
    #[serde(default)]
    pub max: Option<f64>,
    #[serde(default = "default_k")]
    pub k: f64,
}

fn default_direction() -> Direction {
    Direction::Constant
}

fn default_k() -> f64 {
    1.0
}

impl ScheduleConfig {
    pub fn constant(v: f64) -> Self {
        ScheduleConfig { direction: Direction::Constant, min: v, max: None, k: 1.0 }
    }

    pub fn spec(&self) -> Result<ScheduleSpec> {
        let max = self.max.unwrap_or(self.min);
        let spec = match self.direction {
            Direction::Constant => {
                if max != self.min {
                    return Err(Error::InvalidConfig(format!(
                        "constant schedule with min {} != max {max}",
                        self.min
                    )));
                }
                ScheduleSpec::constant(self.min)
            }
            Direction::Decay => ScheduleSpec::decay(max, self.min, self.k),
            Direction::Growth => ScheduleSpec::growth(self.min, max, self.k),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub rounds: u32,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default = "default_max_depth")]
    pub max_depth: usize,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default = "default_min_leaf_rows")]
    pub min_leaf_rows: usize,
    #[serde(default = "default_min_child_hessian")]
    pub min_child_hessian: f64,
    #[serde(default = "default_train_seed")]
    pub seed: u64,
    /// Trees per round.
    #[serde(default = "default_unit_schedule")]
    pub trees: ScheduleConfig,
    /// Row-sample rate per round.
    #[serde(default = "default_unit_schedule")]
    pub sample_rate: ScheduleConfig,
    /// Feature-sample rate per round.
    #[serde(default = "default_unit_schedule")]
    pub feature_rate: ScheduleConfig,
}

fn default_learning_rate() -> f64 {
    0.1
}

fn default_lambda() -> f64 {
    1.0
}

fn default_max_depth() -> usize {
    3
}

fn default_bins() -> usize {
    32
}

fn default_min_leaf_rows() -> usize {
    10
}

fn default_min_child_hessian() -> f64 {
    1e-3
}

fn default_train_seed() -> u64 {
    17
}

fn default_unit_schedule() -> ScheduleConfig {
    ScheduleConfig::constant(1.0)
}

impl TrainSection {
    pub fn train_config(&self) -> Result<TrainConfig> {
        let config = TrainConfig {
            rounds: self.rounds,
            learning_rate: self.learning_rate,
            lambda: self.lambda,
            gamma: self.gamma,
            max_depth: self.max_depth,
            n_bins: self.bins,
            trees_per_layer: self.trees.spec()?,
            row_rate: self.sample_rate.spec()?,
            feature_rate: self.feature_rate.spec()?,
            constraints: SplitConstraints {
                min_leaf_rows: self.min_leaf_rows,
                min_child_hessian: self.min_child_hessian,
            },
            seed: self.seed,
        };
        config.validate()?;
        Ok(config)
    }

    /// Same run with all dynamics switched off: one tree per round over
    /// all rows and features — the sequential-boosting baseline.
    pub fn baseline_config(&self) -> Result<TrainConfig> {
        let mut config = self.train_config()?;
        config.trees_per_layer = ScheduleSpec::constant(1.0);
        config.row_rate = ScheduleSpec::constant(1.0);
        config.feature_rate = ScheduleSpec::constant(1.0);
        Ok(config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RuntimeSection {
    /// Wall time of one full-data tree, seconds. When absent the harness
    /// measures it with a one-tree probe run.
    pub unit_time: Option<f64>,
    /// One-off setup cost, seconds.
    pub fixed_overhead: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub crypto: CryptoConfig,
    pub train: TrainSection,
    #[serde(default)]
    pub runtime: RuntimeSection,
}

impl ExperimentConfig {
    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: ExperimentConfig = toml::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dataset.partition.is_empty() || self.dataset.partition.contains(&0) {
            return Err(Error::InvalidConfig(
                "partition must list a positive feature count per party".into(),
            ));
        }
        let f = self.split.test_fraction;
        if f.is_nan() || f <= 0.0 || f >= 1.0 {
            return Err(Error::InvalidConfig(format!(
                "test_fraction must be in (0, 1), got {f}"
            )));
        }
        if let Some(t) = self.runtime.unit_time {
            if t.is_nan() || t <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "unit_time must be positive, got {t}"
                )));
            }
        }
        self.train.train_config()?;
        Ok(())
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        std::fs::write(path, toml::to_string_pretty(self)?)?;
        Ok(())
    }
}
