use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Seen,
    Unseen,
}

/// Labeled feature vectors with a seen/unseen class split and optional
/// per-class attribute vectors.
///
/// Immutable once built; all invariants are checked by [`FeatureDataset::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDataset {
    features: Matrix<f32>,
    labels: Vec<u32>,
    class_names: Vec<String>,
    splits: Vec<Split>,
    attributes: Option<Matrix<f32>>,
    by_class: Vec<Vec<usize>>,
}

impl FeatureDataset {
    pub fn new(
        features: Matrix<f32>,
        labels: Vec<u32>,
        class_names: Vec<String>,
        splits: Vec<Split>,
        attributes: Option<Matrix<f32>>,
    ) -> Result<Self> {
        let classes = class_names.len();
        if splits.len() != classes {
            return Err(Error::Dataset(format!(
                "{} split tags for {classes} classes",
                splits.len()
            )));
        }
        if labels.len() != features.rows() {
            return Err(Error::Dataset(format!(
                "{} labels for {} feature rows",
                labels.len(),
                features.rows()
            )));
        }
        if let Some(a) = &attributes {
            if a.rows() != classes {
                return Err(Error::Dataset(format!(
                    "{} attribute vectors for {classes} classes",
                    a.rows()
                )));
            }
            if !a.all_finite() {
                return Err(Error::Dataset("non-finite attribute value".into()));
            }
        }
        if !features.all_finite() {
            return Err(Error::Dataset("non-finite feature value".into()));
        }
        let mut by_class = vec![Vec::new(); classes];
        for (row, &label) in labels.iter().enumerate() {
            let slot = by_class.get_mut(label as usize).ok_or_else(|| {
                Error::Dataset(format!("row {row}: label {label} is not one of {classes} classes"))
            })?;
            slot.push(row);
        }
        Ok(Self {
            features,
            labels,
            class_names,
            splits,
            attributes,
            by_class,
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn features(&self) -> &Matrix<f32> {
        &self.features
    }

    pub fn feature(&self, row: usize) -> &[f32] {
        self.features.row(row)
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn class_name(&self, class: usize) -> &str {
        &self.class_names[class]
    }

    pub fn splits(&self) -> &[Split] {
        &self.splits
    }

    pub fn split_of(&self, class: usize) -> Split {
        self.splits[class]
    }

    pub fn attributes(&self) -> Option<&Matrix<f32>> {
        self.attributes.as_ref()
    }

    pub fn attribute_dim(&self) -> usize {
        self.attributes.as_ref().map_or(0, Matrix::cols)
    }

    /// Row indices of `class`, ascending.
    pub fn class_rows(&self, class: usize) -> &[usize] {
        &self.by_class[class]
    }

    pub fn classes_in(&self, split: Split) -> Vec<usize> {
        (0..self.num_classes()).filter(|&c| self.splits[c] == split).collect()
    }

    pub fn seen_classes(&self) -> Vec<usize> {
        self.classes_in(Split::Seen)
    }

    pub fn unseen_classes(&self) -> Vec<usize> {
        self.classes_in(Split::Unseen)
    }

    /// Number of samples belonging to seen classes.
    pub fn seen_len(&self) -> usize {
        self.seen_classes().iter().map(|&c| self.by_class[c].len()).sum()
    }
}
