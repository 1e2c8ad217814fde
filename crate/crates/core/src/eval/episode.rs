use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::data::FeatureDataset;
use crate::error::{Error, Result};
use crate::nn::{Matrix, Scalar};
use crate::rng::seeded;

/// One N-way k-shot task over unseen classes. Rows index the dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Episode {
    pub way: usize,
    pub shot: usize,
    /// Dataset class id of every episode label `0..way`.
    pub classes: Vec<usize>,
    /// `shot` rows per episode label, in draw order.
    pub support: Vec<Vec<usize>>,
    /// Every other row of the episode classes, grouped by label, ascending.
    pub query: Vec<usize>,
    pub query_labels: Vec<usize>,
    pub seed: u64,
}

pub fn draw_episode(dataset: &FeatureDataset, way: usize, shot: usize, seed: u64) -> Result<Episode> {
    if way == 0 || shot == 0 {
        return Err(Error::Episode(format!("{way}-way {shot}-shot is empty")));
    }
    let unseen = dataset.unseen_classes();
    if unseen.len() < way {
        return Err(Error::Episode(format!(
            "{way}-way episodes need {way} unseen classes, dataset has {}",
            unseen.len()
        )));
    }
    if let Some(&c) = unseen.iter().find(|&&c| dataset.class_rows(c).len() <= shot) {
        return Err(Error::Episode(format!(
            "class {:?} has {} samples; {shot}-shot needs more than {shot}",
            dataset.class_name(c),
            dataset.class_rows(c).len()
        )));
    }
    let mut rng = seeded(seed);
    let classes: Vec<usize> = sample(&mut rng, unseen.len(), way).into_iter().map(|i| unseen[i]).collect();
    let mut support = Vec::with_capacity(way);
    let mut query = Vec::new();
    let mut query_labels = Vec::new();
    for (label, &c) in classes.iter().enumerate() {
        let rows = dataset.class_rows(c);
        let picked: Vec<usize> = sample(&mut rng, rows.len(), shot).into_iter().collect();
        let mut rest: Vec<usize> = (0..rows.len()).filter(|i| !picked.contains(i)).map(|i| rows[i]).collect();
        rest.sort_unstable();
        query_labels.extend(std::iter::repeat_n(label, rest.len()));
        query.extend(rest);
        support.push(picked.into_iter().map(|i| rows[i]).collect());
    }
    Ok(Episode {
        way,
        shot,
        classes,
        support,
        query,
        query_labels,
        seed,
    })
}

impl Episode {
    pub fn support_features<T: Scalar>(&self, dataset: &FeatureDataset, label: usize) -> Vec<Vec<T>> {
        self.support[label]
            .iter()
            .map(|&r| dataset.feature(r).iter().map(|&v| T::of(v as f64)).collect())
            .collect()
    }

    pub fn query_features<T: Scalar>(&self, dataset: &FeatureDataset) -> Matrix<T> {
        rows_as::<T>(dataset, &self.query)
    }
}

pub(crate) fn rows_as<T: Scalar>(dataset: &FeatureDataset, rows: &[usize]) -> Matrix<T> {
    let d = dataset.dim();
    let mut data = Vec::with_capacity(rows.len() * d);
    for &r in rows {
        data.extend(dataset.feature(r).iter().map(|&v| T::of(v as f64)));
    }
    Matrix::from_vec(rows.len(), d, data).expect("row count times dim")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic::{gen_synthetic, SyntheticSpec};

    #[test]
    fn counts_for_twenty_sample_classes() {
        let ds = gen_synthetic(&SyntheticSpec {
            samples_per_class: 20,
            ..SyntheticSpec::default()
        })
        .unwrap();
        let ep = draw_episode(&ds, 5, 1, 3).unwrap();
        assert_eq!(ep.support.iter().map(Vec::len).sum::<usize>(), 5);
        assert_eq!(ep.query.len(), 95);
    }

    #[test]
    fn all_unseen_classes() {
        let ds = gen_synthetic(&SyntheticSpec::default()).unwrap();
        let n = ds.unseen_classes().len();
        let mut ep = draw_episode(&ds, n, 2, 0).unwrap();
        ep.classes.sort_unstable();
        assert_eq!(ep.classes, ds.unseen_classes());
    }

    #[test]
    fn too_many_ways_or_shots() {
        let ds = gen_synthetic(&SyntheticSpec::default()).unwrap();
        assert!(matches!(draw_episode(&ds, 99, 1, 0), Err(Error::Episode(_))));
        assert!(matches!(draw_episode(&ds, 2, 50, 0), Err(Error::Episode(_))));
    }
}
