use rand::Rng as _;

use crate::data::FeatureDataset;
use crate::error::{Error, Result};
use crate::rng::{seeded, Rng};

/// An ordered pair of distinct rows from one seen class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainingPair {
    pub class: usize,
    /// Row of the sample to reconstruct.
    pub x: usize,
    /// Row of the anchor.
    pub y: usize,
}

/// Uniform same-class pair sampler over the seen split. Unseen classes are
/// never reachable through it.
#[derive(Debug, Clone)]
pub struct PairSampler<'a> {
    dataset: &'a FeatureDataset,
    classes: Vec<usize>,
}

impl<'a> PairSampler<'a> {
    pub fn new(dataset: &'a FeatureDataset) -> Result<Self> {
        let classes = dataset.seen_classes();
        if classes.is_empty() {
            return Err(Error::Dataset("dataset has no seen classes".into()));
        }
        if let Some(&c) = classes.iter().find(|&&c| dataset.class_rows(c).len() < 2) {
            return Err(Error::Dataset(format!(
                "seen class {:?} has {} sample(s); pairs need at least 2",
                dataset.class_name(c),
                dataset.class_rows(c).len()
            )));
        }
        Ok(Self { dataset, classes })
    }

    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    /// A uniformly chosen seen class, then an ordered pair of distinct rows.
    pub fn draw(&self, rng: &mut Rng) -> TrainingPair {
        let class = self.classes[rng.random_range(0..self.classes.len())];
        let rows = self.dataset.class_rows(class);
        let i = rng.random_range(0..rows.len());
        let mut j = rng.random_range(0..rows.len() - 1);
        if j >= i {
            j += 1;
        }
        TrainingPair {
            class,
            x: rows[i],
            y: rows[j],
        }
    }
}

/// Endless seeded stream of training pairs.
pub struct PairStream<'a> {
    sampler: PairSampler<'a>,
    rng: Rng,
}

impl Iterator for PairStream<'_> {
    type Item = TrainingPair;

    fn next(&mut self) -> Option<TrainingPair> {
        Some(self.sampler.draw(&mut self.rng))
    }
}

pub fn make_training_pairs(dataset: &FeatureDataset, seed: u64) -> Result<PairStream<'_>> {
    Ok(PairStream {
        sampler: PairSampler::new(dataset)?,
        rng: seeded(seed),
    })
}
