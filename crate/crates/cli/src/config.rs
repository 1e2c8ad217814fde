//! Run configuration: built-in defaults, overlaid by an optional TOML file,
//! overlaid by command-line flags.

use std::path::{Path, PathBuf};

use denc::data::SyntheticSpec;
use denc::delta::{ArchConfig, Precision, TrainConfig, Variant};
use denc::eval::{ClassifierConfig, EvalConfig};
use denc::nn::{DropoutPlacement, DropoutSpec};
use serde::{Deserialize, Serialize};

pub const SEED_ENV: &str = "DENC_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchSection {
    pub hidden_dim: usize,
    pub z_dim: usize,
}

impl Default for ArchSection {
    fn default() -> Self {
        Self {
            hidden_dim: 8192,
            z_dim: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Hidden-layer dropout rate.
    pub dropout: f64,
    /// Encoder input dropout of the denoising variants.
    pub input_dropout: f64,
    pub precision: Precision,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            batch_size: t.batch_size,
            dropout: t.dropout.rate,
            input_dropout: t.dropout.input_rate,
            precision: t.precision,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub way: usize,
    pub shot: usize,
    pub episodes: usize,
    pub samples_per_class: usize,
    pub counts: Vec<usize>,
    pub classifier: ClassifierConfig,
}

impl Default for EvalSection {
    fn default() -> Self {
        let e = EvalConfig::default();
        Self {
            way: e.way,
            shot: e.shot,
            episodes: e.episodes,
            samples_per_class: e.samples_per_class,
            counts: vec![16, 32, 64, 128, 256, 512, 1024],
            classifier: e.classifier,
        }
    }
}

/// Everything that determines a run's outputs. Worker count and output
/// directory are deliberately absent: they never change results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    pub dataset: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub baseline: Option<String>,
    pub variant: Variant,
    pub seed: u64,
    pub arch: ArchSection,
    pub train: TrainSection,
    pub eval: EvalSection,
    pub gen: SyntheticSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: String::new(),
            dataset: None,
            model: None,
            baseline: None,
            variant: Variant::Full,
            seed: 0,
            arch: ArchSection::default(),
            train: TrainSection::default(),
            eval: EvalSection::default(),
            gen: SyntheticSpec::default(),
        }
    }
}

impl RunConfig {
    /// Defaults overlaid with `path`, if given. A seed from the file wins
    /// over `DENC_SEED`; the environment only replaces the built-in default.
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let env_seed = match std::env::var(SEED_ENV) {
            Ok(s) => Some(
                s.trim()
                    .parse::<u64>()
                    .map_err(|e| anyhow::anyhow!("{SEED_ENV}={s:?} is not a seed: {e}"))?,
            ),
            Err(_) => None,
        };
        let Some(path) = path else {
            return Ok(Self {
                seed: env_seed.unwrap_or(0),
                ..Self::default()
            });
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
        let table: toml::Table = text
            .parse()
            .map_err(|e| anyhow::anyhow!("config {}: {e}", path.display()))?;
        let file_has_seed = table.contains_key("seed");
        let mut cfg: RunConfig = table
            .try_into()
            .map_err(|e| anyhow::anyhow!("config {}: {e}", path.display()))?;
        if !file_has_seed {
            cfg.seed = env_seed.unwrap_or(0);
        }
        Ok(cfg)
    }

    pub fn arch(&self, feature_dim: usize, attribute_dim: usize) -> ArchConfig {
        ArchConfig {
            feature_dim,
            hidden_dim: self.arch.hidden_dim,
            z_dim: self.arch.z_dim,
            attribute_dim,
            variant: self.variant,
        }
    }

    pub fn train_config(&self, variant: Variant) -> TrainConfig {
        let placement = if variant.is_denoising() {
            DropoutPlacement::InputAndHidden
        } else {
            DropoutPlacement::HiddenOnly
        };
        TrainConfig {
            learning_rate: self.train.learning_rate,
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            dropout: DropoutSpec {
                rate: self.train.dropout,
                placement,
                input_rate: self.train.input_dropout,
            },
            precision: self.train.precision,
            seed: self.seed,
        }
    }

    pub fn eval_config(&self, jobs: usize) -> EvalConfig {
        EvalConfig {
            way: self.eval.way,
            shot: self.eval.shot,
            episodes: self.eval.episodes,
            samples_per_class: self.eval.samples_per_class,
            seed: self.seed,
            jobs,
            classifier: self.eval.classifier,
        }
    }

    pub fn fingerprint(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}
