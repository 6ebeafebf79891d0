use super::{ParamStore, Tensor};
use crate::error::{Result, ScgirError};

/// Plain gradient descent `w <- w - eta * g`.
pub fn sgd_step(params: &mut Tensor, grads: &Tensor, eta: f64) -> Result<()> {
    if params.shape() != grads.shape() {
        return Err(ScgirError::shape("sgd_step", params.shape(), grads.shape()));
    }
    for (w, g) in params.data_mut().iter_mut().zip(grads.data()) {
        *w -= eta * g;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Cosine-anneal the learning rate from `lr` to `lr_min` over the run.
    pub cosine: bool,
    pub lr_min: f64,
}

impl OptimizerConfig {
    pub fn adam(lr: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Adam,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            cosine: false,
            lr_min: 0.0,
        }
    }

    pub fn sgd(lr: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Sgd,
            ..Self::adam(lr)
        }
    }

    pub fn with_cosine(mut self, lr_min: f64) -> Self {
        self.cosine = true;
        self.lr_min = lr_min;
        self
    }

    /// Learning rate for `epoch` of `epochs` (cosine annealing when enabled).
    pub fn lr_at(&self, epoch: usize, epochs: usize) -> f64 {
        if !self.cosine || epochs == 0 {
            return self.lr;
        }
        let t = epoch as f64 / epochs as f64;
        self.lr_min + 0.5 * (self.lr - self.lr_min) * (1.0 + (std::f64::consts::PI * t).cos())
    }
}

/// Optimizer state for the trainable entries of one [`ParamStore`].
#[derive(Debug, Clone)]
pub struct Optimizer {
    cfg: OptimizerConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    steps: u64,
}

impl Optimizer {
    pub fn new(cfg: OptimizerConfig, store: &ParamStore) -> Self {
        let zeros: Vec<Vec<f64>> = store.entries().iter().map(|e| vec![0.0; e.value.len()]).collect();
        Optimizer {
            cfg,
            m: zeros.clone(),
            v: zeros,
            steps: 0,
        }
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.cfg
    }

    /// Applies one update with learning rate `lr`; `grads` follows declaration order.
    pub fn step(&mut self, store: &mut ParamStore, grads: &[Tensor], lr: f64) -> Result<()> {
        if grads.len() != store.len() {
            return Err(ScgirError::Contract(format!(
                "{} gradients for {} parameters",
                grads.len(),
                store.len()
            )));
        }
        self.steps += 1;
        let t = self.steps as i32;
        let (b1, b2) = (self.cfg.beta1, self.cfg.beta2);
        let bc1 = 1.0 - b1.powi(t);
        let bc2 = 1.0 - b2.powi(t);
        for (idx, (entry, g)) in store.entries_mut().iter_mut().zip(grads).enumerate() {
            if !entry.trainable {
                continue;
            }
            match self.cfg.kind {
                OptimizerKind::Sgd => sgd_step(&mut entry.value, g, lr)?,
                OptimizerKind::Adam => {
                    let (m, v) = (&mut self.m[idx], &mut self.v[idx]);
                    for (((w, &gv), mi), vi) in entry.value.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
                        *mi = b1 * *mi + (1.0 - b1) * gv;
                        *vi = b2 * *vi + (1.0 - b2) * gv * gv;
                        let mhat = *mi / bc1;
                        let vhat = *vi / bc2;
                        *w -= lr * mhat / (vhat.sqrt() + self.cfg.eps);
                    }
                }
            }
        }
        Ok(())
    }
}
