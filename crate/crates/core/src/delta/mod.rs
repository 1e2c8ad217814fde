//! The delta-encoder: an autoencoder whose bottleneck code carries the
//! deformation between a sample `X` and a same-class anchor `Y`.
//!
//! Training reconstructs `X` from `D(E(X, Y), Y)` on seen-class pairs.
//! Synthesis encodes fresh seen-class pairs and decodes the codes against an
//! anchor from an unseen class. [`Variant`] also covers the ablation ladder
//! (attribute-conditioned and denoising autoencoders, non-parametric codes)
//! and the closed-form linear-offset baseline.

mod model;
mod pairs;
mod synth;
mod train;

pub use model::{ArchConfig, DeltaEncoderModel, TrainingFingerprint, Variant};
pub use pairs::{make_training_pairs, PairSampler, PairStream, TrainingPair};
pub use synth::{block_sizes, sample_z, synthesize, synthesize_kshot, DeltaCode, Provenance, SyntheticSet};
pub use train::{train, Precision, TrainConfig};
