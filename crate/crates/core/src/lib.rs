//! Few-shot classification by sample synthesis in feature space.
//!
//! A delta-encoder learns to extract the deformation between two samples of
//! the same class and to re-apply it to a new anchor. Once trained on seen
//! classes it can populate an unseen class from one or a few examples; a
//! linear classifier trained on the synthesized population is then scored on
//! the remaining real samples.
//!
//! Modules:
//!
//! - [`nn`]: dense layers, losses, Adam and a finite-difference checker.
//! - [`delta`]: the encoder/decoder model, its ablation variants, training
//!   and synthesis.
//! - [`eval`]: N-way k-shot episodes, the linear classifier, baselines and
//!   report aggregation.
//! - [`data`]: feature datasets, file formats and a synthetic benchmark.

pub mod data;
pub mod delta;
pub mod error;
pub mod eval;
pub mod nn;
pub mod rng;

pub use error::{Error, FormatError, Result};
