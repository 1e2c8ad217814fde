use serde::{Deserialize, Serialize};

use crate::data::FeatureDataset;
use crate::delta::model::DeltaEncoderModel;
use crate::delta::pairs::{PairSampler, TrainingPair};
use crate::delta::Variant;
use crate::error::{Error, Result};
use crate::nn::{AdamConfig, AdamState, DropoutPlacement, DropoutSpec, Matrix, Mode, Parameterized, Scalar};
use crate::rng::{derive_seed, seeded, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

impl std::str::FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" | "32" => Ok(Precision::F32),
            "f64" | "64" => Ok(Precision::F64),
            _ => Err(Error::Config(format!("unknown precision {s:?}; expected f32 or f64"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout: DropoutSpec,
    pub precision: Precision,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-5,
            epochs: 10,
            batch_size: 128,
            dropout: DropoutSpec::default(),
            precision: Precision::F32,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Defaults with 20% input dropout switched on for the denoising variants.
    pub fn for_variant(variant: Variant) -> Self {
        let mut c = Self::default();
        if variant.is_denoising() {
            c.dropout.placement = DropoutPlacement::InputAndHidden;
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        self.dropout.validate()
    }
}

/// Rows of one training batch: sample, anchor and decoder conditioning.
pub(crate) struct Batch<T> {
    pub x: Matrix<T>,
    pub y: Matrix<T>,
    pub condition: Matrix<T>,
}

pub(crate) fn to_scalars<T: Scalar>(row: &[f32]) -> impl Iterator<Item = T> + '_ {
    row.iter().map(|&v| T::of(v as f64))
}

pub(crate) fn build_batch<T: Scalar>(
    model: &DeltaEncoderModel<T>,
    dataset: &FeatureDataset,
    pairs: &[TrainingPair],
) -> Result<Batch<T>> {
    let d = dataset.dim();
    let mut x: Vec<T> = Vec::with_capacity(pairs.len() * d);
    let mut y: Vec<T> = Vec::with_capacity(pairs.len() * d);
    for p in pairs {
        x.extend(to_scalars::<T>(dataset.feature(p.x)));
        y.extend(to_scalars::<T>(dataset.feature(p.y)));
    }
    let x = Matrix::from_vec(pairs.len(), d, x)?;
    let y = Matrix::from_vec(pairs.len(), d, y)?;
    let condition = if model.variant().uses_attributes() {
        let attrs = dataset.attributes().ok_or_else(|| {
            Error::Dataset(format!("variant {} needs class attributes", model.variant()))
        })?;
        let rows: Vec<Vec<T>> = pairs.iter().map(|p| to_scalars(attrs.row(p.class)).collect()).collect();
        Matrix::from_rows(attrs.cols(), rows)?
    } else {
        y.clone()
    };
    Ok(Batch { x, y, condition })
}

/// Checks that `dataset` fits `model`'s input widths.
pub(crate) fn check_compatible<T: Scalar>(model: &DeltaEncoderModel<T>, dataset: &FeatureDataset) -> Result<()> {
    if dataset.dim() != model.arch.feature_dim {
        return Err(Error::Config(format!(
            "dataset feature dim {} does not match model feature dim {}",
            dataset.dim(),
            model.arch.feature_dim
        )));
    }
    if model.variant().uses_attributes() && dataset.attribute_dim() != model.arch.attribute_dim {
        return Err(Error::Dataset(format!(
            "variant {} needs {}-dim class attributes, dataset has {}",
            model.variant(),
            model.arch.attribute_dim,
            dataset.attribute_dim()
        )));
    }
    Ok(())
}

/// Trains `model` on same-class seen pairs and returns the per-epoch mean
/// batch loss. One epoch is `ceil(seen samples / batch size)` batches of
/// freshly drawn pairs.
pub fn train<T: Scalar>(
    model: &mut DeltaEncoderModel<T>,
    dataset: &FeatureDataset,
    config: &TrainConfig,
) -> Result<Vec<f64>> {
    if model.variant().is_closed_form() {
        return Err(Error::Config(format!("variant {} has nothing to train", model.variant())));
    }
    config.validate()?;
    check_compatible(model, dataset)?;
    let sampler = PairSampler::new(dataset)?;
    let batches = dataset.seen_len().div_ceil(config.batch_size);

    let mut pair_rng = seeded(derive_seed(config.seed, stream::TRAIN));
    let mut noise_rng = seeded(derive_seed(config.seed, stream::TRAIN + 1));
    let sizes: Vec<usize> = model.params().iter().map(|(_, p)| p.len()).collect();
    let mut adam = AdamState::<T>::new(AdamConfig::with_lr(config.learning_rate), sizes);

    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut total = 0.0;
        for b in 0..batches {
            let pairs: Vec<TrainingPair> = (0..config.batch_size).map(|_| sampler.draw(&mut pair_rng)).collect();
            let batch = build_batch(model, dataset, &pairs)?;
            let pass = model.pass(
                &batch.x,
                &batch.y,
                &batch.condition,
                &config.dropout,
                Mode::Train,
                &mut noise_rng,
            )?;
            let loss = pass.loss.as_f64();
            if !loss.is_finite() {
                return Err(Error::numerical(
                    format!("epoch {epoch} batch {b}"),
                    format!("reconstruction loss {loss}"),
                ));
            }
            adam.update(model.params_mut(), &pass.grads).map_err(|e| match e {
                Error::Numerical { location, detail } => {
                    Error::numerical(format!("epoch {epoch} batch {b} {location}"), detail)
                }
                other => other,
            })?;
            total += loss;
        }
        history.push(total / batches as f64);
    }

    if config.epochs == 0 {
        return Ok(history);
    }
    let fp = &mut model.fingerprint;
    fp.trained = true;
    fp.train_seed = Some(config.seed);
    fp.epochs += config.epochs;
    fp.learning_rate = Some(config.learning_rate);
    fp.batch_size = Some(config.batch_size);
    fp.loss_history.extend_from_slice(&history);
    Ok(history)
}
