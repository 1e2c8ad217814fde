use rand_distr::{Distribution, StandardNormal};

use crate::data::FeatureDataset;
use crate::delta::model::DeltaEncoderModel;
use crate::delta::pairs::{PairSampler, TrainingPair};
use crate::delta::train::{build_batch, check_compatible};
use crate::error::{Error, Result};
use crate::nn::{Matrix, Scalar};
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Drawn from the same-class seen pair `(x, y)`. Variants whose encoder
    /// only sees `X` use `x` alone.
    Pair { class: usize, x: usize, y: usize },
    /// Drawn from `N(0, I)`.
    Random,
}

/// A deformation code. For the linear-offset variant `z` is the literal
/// feature difference `X^s - Y^s`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaCode<T> {
    pub z: Vec<T>,
    pub provenance: Provenance,
}

/// Draws `count` deformation codes, one fresh seen pair per code.
/// Parametric variants sample `N(0, I)` instead.
pub fn sample_z<T: Scalar>(
    model: &DeltaEncoderModel<T>,
    dataset: &FeatureDataset,
    count: usize,
    seed: u64,
) -> Result<Vec<DeltaCode<T>>> {
    if !model.is_trained() {
        return Err(Error::State("codes requested from an untrained model".into()));
    }
    let mut rng = seeded(seed);
    let variant = model.variant();
    if variant.parametric_codes() {
        return Ok((0..count)
            .map(|_| DeltaCode {
                z: (0..model.arch.z_dim)
                    .map(|_| T::of(StandardNormal.sample(&mut rng)))
                    .collect(),
                provenance: Provenance::Random,
            })
            .collect());
    }
    check_compatible(model, dataset)?;
    let sampler = PairSampler::new(dataset)?;
    let pairs: Vec<TrainingPair> = (0..count).map(|_| sampler.draw(&mut rng)).collect();
    if pairs.is_empty() {
        return Ok(Vec::new());
    }
    let batch = build_batch(model, dataset, &pairs)?;
    let codes = if variant.is_closed_form() {
        let mut diff = batch.x;
        for (v, &y) in diff.as_mut_slice().iter_mut().zip(batch.y.as_slice()) {
            *v = *v - y;
        }
        diff
    } else {
        model.encode(&batch.x, &batch.y)?
    };
    Ok(pairs
        .iter()
        .zip(codes.iter_rows())
        .map(|(p, z)| DeltaCode {
            z: z.to_vec(),
            provenance: Provenance::Pair {
                class: p.class,
                x: p.x,
                y: p.y,
            },
        })
        .collect())
}

/// Applies every code to `anchor`: row `i` is `D(z_i, anchor)`, or
/// `anchor + z_i` for the linear-offset variant. Eval mode, deterministic.
pub fn synthesize<T: Scalar>(model: &DeltaEncoderModel<T>, codes: &[DeltaCode<T>], anchor: &[T]) -> Result<Matrix<T>> {
    let arch = &model.arch;
    if anchor.len() != arch.condition_dim() {
        return Err(Error::Shape {
            op: "synthesize",
            left: (1, anchor.len()),
            right: (1, arch.condition_dim()),
        });
    }
    if let Some(bad) = codes.iter().find(|c| c.z.len() != arch.code_dim()) {
        return Err(Error::Shape {
            op: "synthesize",
            left: (1, bad.z.len()),
            right: (1, arch.code_dim()),
        });
    }
    if codes.is_empty() {
        return Ok(Matrix::zeros(0, arch.feature_dim));
    }
    if arch.variant.is_closed_form() {
        let rows = codes
            .iter()
            .map(|c| c.z.iter().zip(anchor).map(|(&z, &y)| y + z).collect::<Vec<T>>());
        return Matrix::from_rows(arch.feature_dim, rows);
    }
    let z = Matrix::from_rows(arch.z_dim, codes.iter().map(|c| c.z.as_slice()))?;
    let condition = Matrix::from_rows(anchor.len(), std::iter::repeat_n(anchor, codes.len()))?;
    model.decode(&z, &condition)
}

/// Samples synthesized from several anchors of one class.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSet<T> {
    pub samples: Matrix<T>,
    /// Index into the anchor list for every row of `samples`.
    pub anchor_of_row: Vec<usize>,
}

/// Splits `total` as evenly as possible over `k` blocks; the first
/// `total % k` blocks get one extra sample.
pub fn block_sizes(total: usize, k: usize) -> Vec<usize> {
    if k == 0 {
        return Vec::new();
    }
    (0..k).map(|i| total / k + usize::from(i < total % k)).collect()
}

/// k-shot synthesis: the `total` budget is split over the anchors and each
/// block is synthesized independently from its own anchor, consuming codes
/// in order.
pub fn synthesize_kshot<T: Scalar>(
    model: &DeltaEncoderModel<T>,
    codes: &[DeltaCode<T>],
    anchors: &[Vec<T>],
    total: usize,
) -> Result<SyntheticSet<T>> {
    if anchors.is_empty() {
        return Err(Error::Argument("k-shot synthesis needs at least one anchor".into()));
    }
    if total < anchors.len() {
        return Err(Error::Argument(format!(
            "budget {total} is smaller than the {} anchors",
            anchors.len()
        )));
    }
    if codes.len() < total {
        return Err(Error::Argument(format!("{} codes for a budget of {total}", codes.len())));
    }
    let mut samples = Matrix::zeros(0, model.arch.feature_dim);
    let mut anchor_of_row = Vec::with_capacity(total);
    let mut offset = 0;
    for (i, (anchor, size)) in anchors.iter().zip(block_sizes(total, anchors.len())).enumerate() {
        let block = synthesize(model, &codes[offset..offset + size], anchor)?;
        samples.vstack(&block)?;
        anchor_of_row.extend(std::iter::repeat_n(i, size));
        offset += size;
    }
    Ok(SyntheticSet { samples, anchor_of_row })
}
