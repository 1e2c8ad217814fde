//! N-way k-shot evaluation on unseen classes.

pub mod classifier;
pub mod episode;
pub mod run;

pub use classifier::{train_linear_classifier, ClassifierConfig, LinearClassifier};
pub use episode::{draw_episode, Episode};
pub use run::{
    baseline_nearest_neighbor, draw_episodes, episode_seed, evaluate, mean_std, run_episode, sweep_csv, sweep_samples,
    synthesize_episode, EvalConfig, EvalReport, Method,
};
