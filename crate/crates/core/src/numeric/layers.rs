use super::{column_moments, BoundParams, GradTape, ParamId, ParamStore, Rng, Tensor, Var};
use crate::error::Result;

/// Whether standardization layers use batch statistics or stored running ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Fully connected layer `x W + b`, `W` stored as `[in, out]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: ParamId,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Dense {
    pub fn new(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, rng: &mut Rng) -> Self {
        let weight = store.add_kaiming(format!("{name}.weight"), &[fan_in, fan_out], fan_in, rng);
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(&[fan_out]));
        Dense {
            weight,
            bias,
            fan_in,
            fan_out,
        }
    }

    pub fn forward(&self, tape: &mut GradTape, params: &BoundParams, x: Var) -> Result<Var> {
        let xw = tape.matmul(x, params.var(self.weight))?;
        tape.add_row(xw, params.var(self.bias))
    }
}

/// Column statistics observed by a [`Standardizer`] in training mode.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    layer: Standardizer,
    mean: Vec<f64>,
    std: Vec<f64>,
}

/// Parameter-free batch standardization with running statistics for eval mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Standardizer {
    pub running_mean: ParamId,
    pub running_std: ParamId,
    pub eps: f64,
    pub momentum: f64,
}

impl Standardizer {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize, eps: f64) -> Self {
        Standardizer {
            running_mean: store.add_buffer(format!("{name}.running_mean"), Tensor::zeros(&[dim])),
            running_std: store.add_buffer(format!("{name}.running_std"), Tensor::full(&[dim], 1.0)),
            eps,
            momentum: 0.1,
        }
    }

    pub fn forward(
        &self,
        tape: &mut GradTape,
        store: &ParamStore,
        x: Var,
        mode: Mode,
    ) -> Result<(Var, Option<BatchStats>)> {
        match mode {
            Mode::Train => {
                let (mean, std) = column_moments(tape.value(x))?;
                let y = tape.standardize(x, self.eps)?;
                Ok((
                    y,
                    Some(BatchStats {
                        layer: *self,
                        mean,
                        std,
                    }),
                ))
            }
            Mode::Eval => {
                let neg_mean = tape.leaf(store.get(self.running_mean).map(|m| -m));
                let inv_std = tape.leaf(store.get(self.running_std).map(|s| 1.0 / (s + self.eps)));
                let centered = tape.add_row(x, neg_mean)?;
                Ok((tape.mul_row(centered, inv_std)?, None))
            }
        }
    }
}

impl BatchStats {
    /// Folds these statistics into the layer's running buffers.
    pub fn apply(&self, store: &mut ParamStore) {
        let m = self.layer.momentum;
        let blend = |old: &Tensor, new: &[f64]| {
            Tensor::vector(old.data().iter().zip(new).map(|(o, n)| (1.0 - m) * o + m * n).collect())
        };
        let mean = blend(store.get(self.layer.running_mean), &self.mean);
        let std = blend(store.get(self.layer.running_std), &self.std);
        store.set(self.layer.running_mean, mean);
        store.set(self.layer.running_std, std);
    }
}
