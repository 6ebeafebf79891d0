use sha2::{Digest, Sha256};

use crate::encoder::checkpoint;
use crate::error::{Result, ScgirError};
use crate::numeric::{
    BatchStats, BoundParams, Dense, GradTape, Mode, ParamId, ParamStore, Rng, Standardizer, Tensor, Var,
    STANDARDIZE_EPS,
};

/// Classifier layout: `input_dim → hidden… → classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct GoaiConfig {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub classes: usize,
    pub prelu_init: f64,
}

impl GoaiConfig {
    pub fn new(input_dim: usize, classes: usize) -> Self {
        GoaiConfig {
            input_dim,
            hidden: vec![64, 64, 64],
            classes,
            prelu_init: 0.25,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.classes < 2 || self.hidden.contains(&0) {
            return Err(ScgirError::Config(format!(
                "goai needs input_dim > 0, classes >= 2 and nonzero hidden widths (got {}, {}, {:?})",
                self.input_dim, self.classes, self.hidden
            )));
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        let hidden: Vec<String> = self.hidden.iter().map(usize::to_string).collect();
        format!(
            "model = goai\ninput_dim = {}\nhidden = {}\nclasses = {}\nprelu_init = {}\n",
            self.input_dim,
            hidden.join(","),
            self.classes,
            self.prelu_init
        )
    }

    pub fn digest(&self) -> [u8; 32] {
        Sha256::digest(self.describe().as_bytes()).into()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Hidden {
    dense: Dense,
    slope: ParamId,
    std: Standardizer,
}

/// Hidden blocks `Linear → PReLU → standardize`, then a linear logit layer.
#[derive(Debug, Clone, PartialEq)]
pub struct GoaiModel {
    config: GoaiConfig,
    store: ParamStore,
    hidden: Vec<Hidden>,
    out: Dense,
}

impl GoaiModel {
    pub fn new(config: GoaiConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        let mut hidden = Vec::with_capacity(config.hidden.len());
        let mut d_in = config.input_dim;
        for (i, &d_out) in config.hidden.iter().enumerate() {
            let dense = Dense::new(&mut store, &format!("goai.fc{i}"), d_in, d_out, rng);
            let slope = store.add(format!("goai.fc{i}.prelu"), Tensor::vector(vec![config.prelu_init]));
            let std = Standardizer::new(&mut store, &format!("goai.fc{i}.std"), d_out, STANDARDIZE_EPS);
            hidden.push(Hidden { dense, slope, std });
            d_in = d_out;
        }
        let out = Dense::new(&mut store, "goai.out", d_in, config.classes, rng);
        Ok(GoaiModel {
            config,
            store,
            hidden,
            out,
        })
    }

    pub fn config(&self) -> &GoaiConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn forward_on_tape(
        &self,
        tape: &mut GradTape,
        params: &BoundParams,
        x: Var,
        mode: Mode,
    ) -> Result<(Var, Vec<BatchStats>)> {
        let xv = tape.value(x);
        if xv.shape().len() != 2 || xv.cols() != self.config.input_dim {
            return Err(ScgirError::shape("goai forward", xv.shape(), &[xv.rows(), self.config.input_dim]));
        }
        let mut h = x;
        let mut stats = Vec::new();
        for layer in &self.hidden {
            h = layer.dense.forward(tape, params, h)?;
            h = tape.prelu(h, params.var(layer.slope))?;
            let (out, s) = layer.std.forward(tape, &self.store, h, mode)?;
            h = out;
            stats.extend(s);
        }
        Ok((self.out.forward(tape, params, h)?, stats))
    }

    pub fn apply_stats(&mut self, stats: &[BatchStats]) {
        for s in stats {
            s.apply(&mut self.store);
        }
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        checkpoint::save_checkpoint(path, &self.store, &self.config.digest())
    }

    pub fn load(config: GoaiConfig, path: &std::path::Path) -> Result<Self> {
        let mut model = GoaiModel::new(config, &mut Rng::seed(0))?;
        model.store = checkpoint::load_checkpoint(path, &model.config.digest(), &model.store)?;
        Ok(model)
    }
}

/// Inference logits (running statistics). Softmax is left to the loss and metrics.
pub fn goai_forward(model: &GoaiModel, y: &Tensor) -> Result<Tensor> {
    let mut tape = GradTape::new();
    let params = model.store.bind(&mut tape);
    let x = tape.leaf(y.clone());
    let (logits, _) = model.forward_on_tape(&mut tape, &params, x, Mode::Eval)?;
    Ok(tape.value(logits).clone())
}

/// Mean `−log softmax(logits)[label]`, stabilized by subtracting the row max.
pub fn cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<f64> {
    if logits.shape().len() != 2 || logits.rows() != labels.len() {
        return Err(ScgirError::shape("cross_entropy", logits.shape(), &[labels.len()]));
    }
    if labels.is_empty() {
        return Err(ScgirError::Data("cross entropy of an empty batch".into()));
    }
    let c = logits.cols();
    let mut total = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        if label >= c {
            return Err(ScgirError::Contract(format!("label {label} out of range for {c} classes")));
        }
        let row = logits.row(i);
        let top = argmax(row);
        let m = row[top];
        // ln(1 + s) keeps tiny losses from rounding to zero
        let s: f64 = row.iter().enumerate().filter(|&(j, _)| j != top).map(|(_, v)| (v - m).exp()).sum();
        total += (m - row[label]) + s.ln_1p();
    }
    Ok(total / labels.len() as f64)
}

/// Row softmax.
pub fn softmax(logits: &Tensor) -> Tensor {
    let c = logits.cols();
    let mut out = logits.clone();
    for row in out.data_mut().chunks_mut(c) {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.iter_mut().for_each(|v| *v = (*v - m).exp());
        let z: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= z);
    }
    out
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best
}

pub fn predictions(logits: &Tensor) -> Vec<usize> {
    (0..logits.rows()).map(|i| argmax(logits.row(i))).collect()
}
