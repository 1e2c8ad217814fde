//! Synthetic benchmark with transferable intra-class deformations.
//!
//! Every sample is `center_c + f(B u)`: `B` is one `d x m` orthonormal basis
//! shared by all classes, `u = mode_c + eps` with `eps` uniform in the
//! `m`-ball of radius `deformation_scale` and `mode_c` a per-class offset of
//! norm `class_mode_scale`, and `f` is `tanh` (or the identity). Because `B`
//! and `f` are shared, a deformation observed between two samples of one class
//! is meaningful for every other class. Class centers live in a `center_dim`
//! subspace orthogonal to `span(B)` and are pairwise at least `separation`
//! apart, so classes are told apart by small offsets against large shared
//! deformations.
//!
//! The defaults are the benchmark: 15 seen and 5 unseen classes of 50 samples
//! in 64 dimensions.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{FeatureDataset, Split};
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::rng::{seeded, Rng};

const CENTER_RETRIES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    /// The last `unseen_classes` classes are tagged unseen.
    pub unseen_classes: usize,
    pub samples_per_class: usize,
    pub feature_dim: usize,
    /// Size `m` of the shared deformation basis.
    pub basis_dim: usize,
    pub deformation_scale: f64,
    pub class_mode_scale: f64,
    pub separation: f64,
    /// Dimension of the subspace holding the class centers; 0 uses the
    /// whole complement of the deformation basis.
    pub center_dim: usize,
    pub nonlinear: bool,
    /// Per-class attribute vectors are emitted when non-zero.
    pub attribute_dim: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            num_classes: 20,
            unseen_classes: 5,
            samples_per_class: 50,
            feature_dim: 64,
            basis_dim: 8,
            deformation_scale: 8.0,
            class_mode_scale: 6.0,
            separation: 0.75,
            center_dim: 8,
            nonlinear: true,
            attribute_dim: 0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    /// Upper bound on `||f(B u)||` for any generated sample.
    pub fn deformation_bound(&self) -> f64 {
        self.deformation_scale + self.class_mode_scale
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.num_classes == 0 || self.samples_per_class == 0 || self.feature_dim == 0 {
            return fail("class count, samples per class and feature dim must be positive".into());
        }
        if self.unseen_classes > self.num_classes {
            return fail(format!(
                "{} unseen classes out of {}",
                self.unseen_classes, self.num_classes
            ));
        }
        if self.basis_dim == 0 || self.basis_dim >= self.feature_dim {
            return fail(format!(
                "basis dim {} must be in [1, feature dim {})",
                self.basis_dim, self.feature_dim
            ));
        }
        if self.center_dim > self.feature_dim - self.basis_dim {
            return fail(format!(
                "center dim {} exceeds the {} dims left by the deformation basis",
                self.center_dim,
                self.feature_dim - self.basis_dim
            ));
        }
        for (name, v) in [
            ("deformation scale", self.deformation_scale),
            ("class mode scale", self.class_mode_scale),
            ("separation", self.separation),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return fail(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        Ok(())
    }
}

fn normal_vec(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Uniform direction on the unit sphere of `R^n`.
fn unit_vec(rng: &mut Rng, n: usize) -> Vec<f64> {
    loop {
        let v = normal_vec(rng, n);
        let l = norm(&v);
        if l > 1e-12 {
            return v.into_iter().map(|x| x / l).collect();
        }
    }
}

/// `m` orthonormal vectors of length `d` (modified Gram-Schmidt).
fn orthonormal_basis(rng: &mut Rng, d: usize, m: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    while basis.len() < m {
        let mut v = normal_vec(rng, d);
        for b in &basis {
            let p = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let l = norm(&v);
        if l > 1e-6 {
            basis.push(v.into_iter().map(|x| x / l).collect());
        }
    }
    basis
}

pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<FeatureDataset> {
    spec.validate()?;
    let (d, m) = (spec.feature_dim, spec.basis_dim);
    let mut rng = seeded(spec.seed);
    let k = if spec.center_dim == 0 { d - m } else { spec.center_dim };
    let mut basis = orthonormal_basis(&mut rng, d, m + k);
    let center_basis = basis.split_off(m);

    // typical pairwise distance of the draws is ~1.2 x separation
    let sigma = 1.2 * spec.separation / ((2 * k) as f64).sqrt();
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(spec.num_classes);
    for class in 0..spec.num_classes {
        let mut placed = false;
        for _ in 0..CENTER_RETRIES {
            let g = normal_vec(&mut rng, k);
            let mut c = vec![0.0; d];
            for (a, gi) in center_basis.iter().zip(&g) {
                c.iter_mut().zip(a).for_each(|(x, y)| *x += sigma * gi * y);
            }
            let far = centers.iter().all(|o| {
                let diff: Vec<f64> = c.iter().zip(o).map(|(a, b)| a - b).collect();
                norm(&diff) >= spec.separation
            });
            if far {
                centers.push(c);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::Config(format!(
                "could not place class {class} at separation {} after {CENTER_RETRIES} draws",
                spec.separation
            )));
        }
    }

    let modes: Vec<Vec<f64>> = (0..spec.num_classes)
        .map(|_| {
            unit_vec(&mut rng, m)
                .into_iter()
                .map(|x| x * spec.class_mode_scale)
                .collect()
        })
        .collect();

    let n = spec.num_classes * spec.samples_per_class;
    let mut features = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for (class, (center, mode)) in centers.iter().zip(&modes).enumerate() {
        for _ in 0..spec.samples_per_class {
            let radius = spec.deformation_scale * rng.random::<f64>().powf(1.0 / m as f64);
            let dir = unit_vec(&mut rng, m);
            let u: Vec<f64> = dir.iter().zip(mode).map(|(e, v)| v + radius * e).collect();
            for (i, &c) in center.iter().enumerate() {
                let bu: f64 = basis.iter().zip(&u).map(|(b, ui)| b[i] * ui).sum();
                let f = if spec.nonlinear { bu.tanh() } else { bu };
                features.push((c + f) as f32);
            }
            labels.push(class as u32);
        }
    }

    let attributes = (spec.attribute_dim > 0)
        .then(|| {
            // a fixed random projection of [center; mode]
            let proj: Vec<Vec<f64>> = (0..spec.attribute_dim)
                .map(|_| normal_vec(&mut rng, d + m))
                .collect();
            let scale = 1.0 / ((d + m) as f64).sqrt();
            let data = centers
                .iter()
                .zip(&modes)
                .flat_map(|(c, v)| {
                    let z: Vec<f64> = c.iter().chain(v).copied().collect();
                    proj.iter()
                        .map(|p| (dot(p, &z) * scale) as f32)
                        .collect::<Vec<_>>()
                })
                .collect();
            Matrix::from_vec(spec.num_classes, spec.attribute_dim, data)
        })
        .transpose()?;

    let class_names = (0..spec.num_classes).map(|c| format!("class_{c:03}")).collect();
    let splits = (0..spec.num_classes)
        .map(|c| {
            if c >= spec.num_classes - spec.unseen_classes {
                Split::Unseen
            } else {
                Split::Seen
            }
        })
        .collect();
    FeatureDataset::new(Matrix::from_vec(n, d, features)?, labels, class_names, splits, attributes)
}
