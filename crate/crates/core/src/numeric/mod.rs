//! Dense tensors, a reverse-mode gradient tape, parameters, optimizers and
//! seeded randomness.

mod layers;
mod optim;
mod params;
mod rng;
mod tape;
mod tensor;

pub use layers::{BatchStats, Dense, Mode, Standardizer};
pub use optim::{sgd_step, Optimizer, OptimizerConfig, OptimizerKind};
pub use params::{BoundParams, ParamEntry, ParamId, ParamStore};
pub use rng::Rng;
pub use tape::{GradTape, Gradients, Var};
pub use tensor::{batch_standardize, column_moments, gelu_scalar, gelu_scalar_grad, Tensor};

/// Standardization epsilon added to the column standard deviation.
pub const STANDARDIZE_EPS: f64 = 1e-5;
