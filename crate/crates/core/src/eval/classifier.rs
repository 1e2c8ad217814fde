use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::loss::{softmax, softmax_cross_entropy};
use crate::nn::{AdamConfig, AdamState, Matrix, Parameterized, Scalar};
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop once the epoch loss has improved by less than `min_improvement`
    /// over the last `patience` epochs.
    pub patience: usize,
    pub min_improvement: f64,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 128,
            max_epochs: 50,
            patience: 5,
            min_improvement: 1e-5,
            seed: 0,
        }
    }
}

/// One dense layer followed by softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier<T> {
    /// `d × classes`
    pub weights: Matrix<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> LinearClassifier<T> {
    pub fn zeros(dim: usize, classes: usize) -> Self {
        Self {
            weights: Matrix::zeros(dim, classes),
            bias: vec![T::zero(); classes],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.bias.len()
    }

    pub fn logits(&self, samples: &Matrix<T>) -> Result<Matrix<T>> {
        let mut out = samples.matmul(&self.weights)?;
        for i in 0..out.rows() {
            for (v, &b) in out.row_mut(i).iter_mut().zip(&self.bias) {
                *v = *v + b;
            }
        }
        Ok(out)
    }

    pub fn probabilities(&self, samples: &Matrix<T>) -> Result<Matrix<T>> {
        Ok(softmax(&self.logits(samples)?))
    }

    /// Argmax labels; ties go to the lowest class index.
    pub fn predict(&self, samples: &Matrix<T>) -> Result<Vec<usize>> {
        let logits = self.logits(samples)?;
        Ok(logits.iter_rows().map(argmax).collect())
    }

    pub fn accuracy(&self, samples: &Matrix<T>, labels: &[usize]) -> Result<f64> {
        Ok(accuracy_of(&self.predict(samples)?, labels))
    }

    /// Mean cross-entropy and its gradient in [`Parameterized`] order.
    pub fn loss_and_gradient(&self, samples: &Matrix<T>, labels: &[usize]) -> Result<(T, Vec<Vec<T>>)> {
        let (loss, g) = softmax_cross_entropy(&self.logits(samples)?, labels)?;
        let gw = samples.t_matmul(&g)?;
        Ok((loss, vec![gw.into_vec(), g.col_sums()]))
    }
}

impl<T: Scalar> Parameterized<T> for LinearClassifier<T> {
    fn params(&self) -> Vec<(String, &[T])> {
        vec![("weights".into(), self.weights.as_slice()), ("bias".into(), &self.bias)]
    }

    fn params_mut(&mut self) -> Vec<(String, &mut [T])> {
        vec![
            ("weights".into(), self.weights.as_mut_slice()),
            ("bias".into(), &mut self.bias),
        ]
    }
}

pub(crate) fn argmax<T: PartialOrd + Copy>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate().skip(1) {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

/// Fraction of `predicted` equal to `labels`; 0 for an empty set.
pub fn accuracy_of(predicted: &[usize], labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(labels).filter(|(p, l)| p == l).count();
    hits as f64 / labels.len() as f64
}

/// Mini-batch Adam on softmax cross-entropy from zero weights.
pub fn train_linear_classifier<T: Scalar>(
    samples: &Matrix<T>,
    labels: &[usize],
    num_classes: usize,
    config: &ClassifierConfig,
) -> Result<LinearClassifier<T>> {
    if labels.len() != samples.rows() {
        return Err(Error::Argument(format!(
            "{} samples but {} labels",
            samples.rows(),
            labels.len()
        )));
    }
    if config.batch_size == 0 {
        return Err(Error::Config("classifier batch size must be positive".into()));
    }
    let mut counts = vec![0usize; num_classes];
    for &l in labels {
        if l >= num_classes {
            return Err(Error::Argument(format!("label {l} out of range for {num_classes} classes")));
        }
        counts[l] += 1;
    }
    if let Some(missing) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Argument(format!("class {missing} has no training samples")));
    }

    let mut clf = LinearClassifier::zeros(samples.cols(), num_classes);
    let mut adam = AdamState::new(AdamConfig::with_lr(config.learning_rate), [clf.weights.as_slice().len(), num_classes]);
    let mut rng = seeded(config.seed);
    let mut order: Vec<usize> = (0..samples.rows()).collect();
    let mut history: Vec<f64> = Vec::with_capacity(config.max_epochs);
    for _ in 0..config.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(config.batch_size) {
            let x = samples.select_rows(chunk);
            let y: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let (loss, grads) = clf.loss_and_gradient(&x, &y)?;
            adam.update(clf.params_mut(), &grads)?;
            total += loss.as_f64();
            batches += 1;
        }
        history.push(total / batches as f64);
        let n = history.len();
        if n > config.patience && history[n - 1 - config.patience] - history[n - 1] < config.min_improvement {
            break;
        }
    }
    Ok(clf)
}
