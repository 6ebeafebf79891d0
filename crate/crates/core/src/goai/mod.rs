//! Goal-oriented task head: a small classifier on received latents, its
//! channel-aware training loop and the task metrics.

mod metrics;
mod model;
mod train;

pub use metrics::{accuracy, f1_score, Averaging};
pub use model::{argmax, cross_entropy, goai_forward, predictions, softmax, GoaiConfig, GoaiModel};
pub use train::{evaluate_goai, train_goai, EvalSummary, GoaiTrainConfig};
