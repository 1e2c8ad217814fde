use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::FeatureDataset;
use crate::delta::{sample_z, synthesize_kshot, DeltaEncoderModel};
use crate::error::{Error, Result};
use crate::eval::classifier::{accuracy_of, train_linear_classifier, ClassifierConfig};
use crate::eval::episode::{draw_episode, rows_as, Episode};
use crate::nn::{Matrix, Scalar};
use crate::rng::{derive_seed, stream};

/// How an episode is scored.
#[derive(Debug, Clone, Copy)]
pub enum Method<'a, T> {
    /// Synthesize from the support with a model, train a linear classifier.
    /// Covers the closed-form linear-offset variant too.
    Synthesis(&'a DeltaEncoderModel<T>),
    NearestNeighbor,
}

impl<T: Scalar> Method<'_, T> {
    pub fn name(&self) -> String {
        match self {
            Method::Synthesis(m) => m.variant().name().to_owned(),
            Method::NearestNeighbor => "nearest_neighbor".to_owned(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub way: usize,
    pub shot: usize,
    pub episodes: usize,
    pub samples_per_class: usize,
    pub seed: u64,
    /// Worker threads; 0 or 1 runs serially. Results do not depend on it.
    pub jobs: usize,
    pub classifier: ClassifierConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            way: 5,
            shot: 1,
            episodes: 10,
            samples_per_class: 1024,
            seed: 0,
            jobs: 1,
            classifier: ClassifierConfig::default(),
        }
    }
}

/// Per-episode accuracies and their summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub way: usize,
    pub shot: usize,
    pub episodes: usize,
    pub samples_per_class: usize,
    pub seed: u64,
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    /// Free-form provenance (model fingerprint, dataset path, ...).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run: Option<serde_json::Value>,
}

impl EvalReport {
    pub fn from_accuracies(method: String, config: &EvalConfig, accuracies: Vec<f64>) -> Self {
        let (mean, std) = mean_std(&accuracies);
        Self {
            method,
            way: config.way,
            shot: config.shot,
            episodes: accuracies.len(),
            samples_per_class: config.samples_per_class,
            seed: config.seed,
            accuracies,
            mean,
            std,
            run: None,
        }
    }

    /// `episode,accuracy` rows.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["episode", "accuracy"])?;
        for (i, a) in self.accuracies.iter().enumerate() {
            w.write_record([i.to_string(), a.to_string()])?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))?).expect("csv is utf-8"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Labels each query by its nearest support vector (Euclidean); ties go to
/// the lowest class index.
pub fn baseline_nearest_neighbor(dataset: &FeatureDataset, episode: &Episode) -> f64 {
    let predicted: Vec<usize> = episode
        .query
        .iter()
        .map(|&q| {
            let x = dataset.feature(q);
            let mut best = (f64::INFINITY, usize::MAX);
            for (label, rows) in episode.support.iter().enumerate() {
                for &s in rows {
                    let d: f64 = x
                        .iter()
                        .zip(dataset.feature(s))
                        .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
                        .sum();
                    if d < best.0 || (d == best.0 && label < best.1) {
                        best = (d, label);
                    }
                }
            }
            best.1
        })
        .collect();
    accuracy_of(&predicted, &episode.query_labels)
}

/// Synthesized training set for an episode: `samples_per_class` rows per
/// episode label, each class split evenly across its support anchors. The
/// attribute-conditioned variant decodes from the class attribute vector.
pub fn synthesize_episode<T: Scalar>(
    model: &DeltaEncoderModel<T>,
    dataset: &FeatureDataset,
    episode: &Episode,
    samples_per_class: usize,
    seed: u64,
) -> Result<(Matrix<T>, Vec<usize>)> {
    let mut samples = Matrix::zeros(0, dataset.dim());
    let mut labels = Vec::with_capacity(samples_per_class * episode.way);
    let synth_seed = derive_seed(seed, stream::SYNTHESIS);
    for label in 0..episode.way {
        let codes = sample_z(model, dataset, samples_per_class, derive_seed(synth_seed, label as u64))?;
        let anchors = if model.variant().uses_attributes() {
            let attrs = dataset.attributes().ok_or_else(|| {
                Error::Dataset(format!("variant {} needs class attributes", model.variant()))
            })?;
            vec![attrs.row(episode.classes[label]).iter().map(|&v| T::of(v as f64)).collect()]
        } else {
            episode.support_features::<T>(dataset, label)
        };
        let set = synthesize_kshot(model, &codes, &anchors, samples_per_class)?;
        samples.vstack(&set.samples)?;
        labels.extend(std::iter::repeat_n(label, set.samples.rows()));
    }
    Ok((samples, labels))
}

/// Query accuracy of a linear classifier trained on synthesized samples.
pub fn run_episode<T: Scalar>(
    model: &DeltaEncoderModel<T>,
    dataset: &FeatureDataset,
    episode: &Episode,
    samples_per_class: usize,
    classifier: &ClassifierConfig,
) -> Result<f64> {
    if episode.query.is_empty() {
        return Err(Error::Episode("episode has no query samples".into()));
    }
    let (samples, labels) = synthesize_episode(model, dataset, episode, samples_per_class, episode.seed)?;
    if !samples.all_finite() {
        return Err(Error::numerical("synthesis", "synthesized samples contain non-finite values"));
    }
    let config = ClassifierConfig {
        seed: derive_seed(episode.seed, stream::CLASSIFIER),
        ..*classifier
    };
    let clf = train_linear_classifier(&samples, &labels, episode.way, &config)?;
    let query = rows_as::<T>(dataset, &episode.query);
    clf.accuracy(&query, &episode.query_labels)
}

/// Seed of episode `index` under `master`.
pub fn episode_seed(master: u64, index: usize) -> u64 {
    derive_seed(master, index as u64)
}

pub fn draw_episodes(dataset: &FeatureDataset, config: &EvalConfig) -> Result<Vec<Episode>> {
    (0..config.episodes)
        .map(|i| draw_episode(dataset, config.way, config.shot, episode_seed(config.seed, i)))
        .collect()
}

fn score<T: Scalar>(
    method: Method<'_, T>,
    dataset: &FeatureDataset,
    episode: &Episode,
    config: &EvalConfig,
    samples_per_class: usize,
) -> Result<f64> {
    match method {
        Method::Synthesis(model) => run_episode(model, dataset, episode, samples_per_class, &config.classifier),
        Method::NearestNeighbor => Ok(baseline_nearest_neighbor(dataset, episode)),
    }
}

/// Runs `work` over `0..n` on `jobs` threads, keeping index order.
fn ordered_map<R: Send>(n: usize, jobs: usize, work: impl Fn(usize) -> Result<R> + Sync + Send) -> Result<Vec<R>> {
    if jobs <= 1 {
        return (0..n).map(work).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} workers: {e}")))?;
    pool.install(|| (0..n).into_par_iter().map(work).collect())
}

/// Averages `config.episodes` independent episodes. Episode `i` depends only
/// on `(config.seed, i)`, so the report is identical for any `jobs`.
pub fn evaluate<T: Scalar>(method: Method<'_, T>, dataset: &FeatureDataset, config: &EvalConfig) -> Result<EvalReport> {
    let episodes = draw_episodes(dataset, config)?;
    let acc = ordered_map(episodes.len(), config.jobs, |i| {
        score(method, dataset, &episodes[i], config, config.samples_per_class)
    })?;
    Ok(EvalReport::from_accuracies(method.name(), config, acc))
}

/// Accuracy at several synthesis budgets over one shared set of episodes.
pub fn sweep_samples<T: Scalar>(
    method: Method<'_, T>,
    dataset: &FeatureDataset,
    config: &EvalConfig,
    counts: &[usize],
) -> Result<Vec<EvalReport>> {
    if counts.is_empty() {
        return Ok(Vec::new());
    }
    let episodes = draw_episodes(dataset, config)?;
    let cells: Vec<(usize, usize)> = counts
        .iter()
        .flat_map(|&c| (0..episodes.len()).map(move |e| (c, e)))
        .collect();
    let acc = ordered_map(cells.len(), config.jobs, |i| {
        let (count, e) = cells[i];
        score(method, dataset, &episodes[e], config, count)
    })?;
    Ok(counts
        .iter()
        .zip(acc.chunks(episodes.len().max(1)))
        .map(|(&count, chunk)| {
            let cfg = EvalConfig {
                samples_per_class: count,
                ..*config
            };
            EvalReport::from_accuracies(method.name(), &cfg, chunk.to_vec())
        })
        .collect())
}

/// `count,episode,accuracy` rows for a sweep.
pub fn sweep_csv(reports: &[EvalReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["count", "episode", "accuracy"])?;
    for r in reports {
        for (i, a) in r.accuracies.iter().enumerate() {
            w.write_record([r.samples_per_class.to_string(), i.to_string(), a.to_string()])?;
        }
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))?).expect("csv is utf-8"))
}
