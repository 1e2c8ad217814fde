//! Datasets, file formats and the synthetic benchmark.

mod bytes;
pub mod checkpoint;
mod dataset;
pub mod export;
pub mod format;
pub mod synthetic;

pub use checkpoint::{decode_model, encode_model, load_model, read_checkpoint_dtype, save_model};
pub use dataset::{FeatureDataset, Split};
pub use export::export_embeddings;
pub use format::{load_dataset, save_dataset};
pub use synthetic::{gen_synthetic, SyntheticSpec};
