use super::loss::{mean_row_cosine, scgir_graph, CrossCorrMatrix, LatentBatch};
use super::model::EncoderModel;
use crate::augment::{AugmentPolicy, ImageBatch};
use crate::error::{Result, ScgirError};
use crate::harness::MetricsRecord;
use crate::numeric::{GradTape, Mode, Optimizer, OptimizerConfig, Rng, STANDARDIZE_EPS};

/// Hyperparameters for self-supervised encoder training.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Weight of the off-diagonal (redundancy) term.
    pub lambda: f64,
    pub eps: f64,
    pub optimizer: OptimizerConfig,
    pub policy: AugmentPolicy,
}

impl Default for EncoderTrainConfig {
    fn default() -> Self {
        EncoderTrainConfig {
            epochs: 200,
            batch_size: 32,
            lambda: 5e-4,
            eps: STANDARDIZE_EPS,
            optimizer: OptimizerConfig::adam(1e-4),
            policy: AugmentPolicy::default(),
        }
    }
}

/// Per-epoch records plus the divergence that stopped training, if any.
#[derive(Debug)]
pub struct TrainReport {
    pub records: Vec<MetricsRecord>,
    pub divergence: Option<ScgirError>,
}

impl TrainReport {
    pub fn into_result(self) -> Result<Vec<MetricsRecord>> {
        match self.divergence {
            Some(e) => Err(e),
            None => Ok(self.records),
        }
    }
}

#[derive(Default)]
struct EpochAccumulator {
    batches: usize,
    total: f64,
    on: f64,
    off: f64,
    cosine: f64,
    cosine_std: f64,
    diag: f64,
    offdiag: f64,
}

/// Shuffled mini-batches; a trailing batch with fewer than two samples is dropped.
pub(crate) fn batches(n: usize, batch_size: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    order
        .chunks(batch_size.max(2))
        .filter(|c| c.len() >= 2)
        .map(<[usize]>::to_vec)
        .collect()
}

/// Views → shared encoder → standardize → cross-correlation → loss → Adam,
/// for `cfg.epochs` epochs. One record per epoch.
pub fn train_encoder(
    model: &mut EncoderModel,
    data: &ImageBatch,
    cfg: &EncoderTrainConfig,
    run_id: &str,
    rng: &mut Rng,
) -> Result<TrainReport> {
    if data.n < 2 {
        return Err(ScgirError::BatchTooSmall { needed: 2, got: data.n });
    }
    if cfg.batch_size < 2 {
        return Err(ScgirError::Config(format!("batch size must be >= 2, got {}", cfg.batch_size)));
    }
    cfg.policy.validate()?;
    let mut opt = Optimizer::new(cfg.optimizer, model.store());
    let mut records = Vec::with_capacity(cfg.epochs);
    let view2_branch = if model.config().tied { 0 } else { 1 };
    for epoch in 0..cfg.epochs {
        let lr = cfg.optimizer.lr_at(epoch, cfg.epochs);
        let mut acc = EpochAccumulator::default();
        for (bi, idx) in batches(data.n, cfg.batch_size, rng).into_iter().enumerate() {
            let x = data.gather(&idx);
            let (v1, v2) = cfg.policy.two_views(&x, rng)?;
            let mut tape = GradTape::new();
            let params = model.store().bind(&mut tape);
            let (z1, s1) = model.forward_on_tape(&mut tape, &params, &v1, 0, Mode::Train)?;
            let (z2, s2) = model.forward_on_tape(&mut tape, &params, &v2, view2_branch, Mode::Train)?;
            let g = scgir_graph(&mut tape, z1, z2, cfg.lambda, cfg.eps)?;
            let loss = tape.value(g.total).item();
            if !loss.is_finite() {
                let mut diag = MetricsRecord::new(run_id, "encoder-diverged");
                diag.epoch = Some(epoch);
                diag.loss_total = Some(loss);
                records.push(diag);
                return Ok(TrainReport {
                    records,
                    divergence: Some(ScgirError::Divergence {
                        phase: "encoder",
                        epoch,
                        batch: bi,
                        loss,
                    }),
                });
            }
            let c = CrossCorrMatrix::new(tape.value(g.cross_corr).clone())?;
            acc.batches += 1;
            acc.total += loss;
            acc.on += tape.value(g.on_diag).item();
            acc.off += tape.value(g.off_diag).item();
            acc.cosine += mean_row_cosine(tape.value(z1), tape.value(z2));
            acc.cosine_std += mean_row_cosine(tape.value(g.std1), tape.value(g.std2));
            acc.diag += c.diag_mean();
            acc.offdiag += c.offdiag_abs_mean();
            let grads = tape.backward(g.total)?;
            opt.step(model.store_mut(), &params.collect(&grads), lr)?;
            model.apply_stats(&s1);
            model.apply_stats(&s2);
        }
        let k = acc.batches.max(1) as f64;
        let mut r = MetricsRecord::new(run_id, "encoder");
        r.epoch = Some(epoch);
        r.loss_total = Some(acc.total / k);
        r.loss_on = Some(acc.on / k);
        r.loss_off = Some(acc.off / k);
        r.cosine_sim = Some(acc.cosine / k);
        r.cosine_sim_std = Some(acc.cosine_std / k);
        r.diag_mean = Some(acc.diag / k);
        r.offdiag_abs_mean = Some(acc.offdiag / k);
        records.push(r);
    }
    Ok(TrainReport {
        records,
        divergence: None,
    })
}

/// Cross-correlation of two fresh views over `data` in one batch (batch statistics,
/// running buffers untouched). Used for before/after heatmaps.
pub fn correlation_snapshot(
    model: &EncoderModel,
    data: &ImageBatch,
    policy: &AugmentPolicy,
    eps: f64,
    rng: &mut Rng,
) -> Result<(CrossCorrMatrix, f64)> {
    let (v1, v2) = policy.two_views(data, rng)?;
    let z1 = model.forward_mode(&v1, Mode::Train)?;
    let view2_branch = if model.config().tied { 0 } else { 1 };
    let z2 = {
        let mut tape = GradTape::new();
        let params = model.store().bind(&mut tape);
        let (z, _) = model.forward_on_tape(&mut tape, &params, &v2, view2_branch, Mode::Train)?;
        LatentBatch::raw(tape.value(z).clone())
    };
    let cos = mean_row_cosine(&z1.values, &z2.values);
    let c = super::loss::cross_correlation(&z1.standardize(eps)?, &z2.standardize(eps)?)?;
    Ok((c, cos))
}
