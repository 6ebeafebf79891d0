use super::metrics::{accuracy, f1_score, Averaging};
use super::model::{goai_forward, predictions, GoaiModel};
use crate::channel::{simulate_batch, ChannelConfig, ChannelModel, LinkConfig};
use crate::encoder::TrainReport;
use crate::error::{Result, ScgirError};
use crate::harness::{LabelBatch, MetricsRecord};
use crate::numeric::{GradTape, Mode, Optimizer, OptimizerConfig, Rng, Tensor};

/// Channel-aware classifier training settings.
#[derive(Debug, Clone, PartialEq)]
pub struct GoaiTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub link: LinkConfig,
    pub channel: ChannelConfig,
}

impl GoaiTrainConfig {
    pub fn new(latent_dim: usize) -> Self {
        GoaiTrainConfig {
            epochs: 100,
            batch_size: 32,
            optimizer: OptimizerConfig::adam(1e-3).with_cosine(0.0),
            link: LinkConfig::new(1.0, latent_dim),
            channel: ChannelConfig::from_snr_db(ChannelModel::Rayleigh, 10.0),
        }
    }
}

fn channel_fields(rec: &mut MetricsRecord, link: &LinkConfig, ch: &ChannelConfig) {
    rec.channel = Some(ch.model.name().to_string());
    rec.snr_db = Some(ch.snr_db());
    rec.sigma_n2 = Some(ch.noise_var);
    rec.compression_ratio = Some(link.compression_ratio);
}

/// Trains on frozen-encoder latents (`n × d`, computed without augmentation).
/// Every batch goes through the link with fresh channel draws.
pub fn train_goai(
    model: &mut GoaiModel,
    latents: &Tensor,
    labels: &LabelBatch,
    cfg: &GoaiTrainConfig,
    run_id: &str,
    rng: &mut Rng,
) -> Result<TrainReport> {
    if latents.rows() != labels.len() {
        return Err(ScgirError::Data(format!(
            "{} latents but {} labels",
            latents.rows(),
            labels.len()
        )));
    }
    if labels.classes != model.config().classes {
        return Err(ScgirError::Config(format!(
            "labels have {} classes, model has {}",
            labels.classes,
            model.config().classes
        )));
    }
    if cfg.batch_size < 2 {
        return Err(ScgirError::Config(format!("batch size must be >= 2, got {}", cfg.batch_size)));
    }
    cfg.link.validate()?;
    let mut opt = Optimizer::new(cfg.optimizer, model.store());
    let mut records = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let lr = cfg.optimizer.lr_at(epoch, cfg.epochs);
        let (mut loss_sum, mut hits, mut seen, mut nb) = (0.0, 0usize, 0usize, 0usize);
        for (bi, idx) in crate::encoder::batches(latents.rows(), cfg.batch_size, rng).into_iter().enumerate() {
            let x = gather_rows(latents, &idx);
            let y = simulate_batch(&x, &cfg.link, &cfg.channel, rng)?;
            let lab: Vec<usize> = idx.iter().map(|&i| labels.labels[i]).collect();
            let mut tape = GradTape::new();
            let params = model.store().bind(&mut tape);
            let input = tape.leaf(y);
            let (logits, stats) = model.forward_on_tape(&mut tape, &params, input, Mode::Train)?;
            let loss_var = tape.softmax_cross_entropy(logits, &lab)?;
            let loss = tape.value(loss_var).item();
            if !loss.is_finite() {
                let mut diag = MetricsRecord::new(run_id, "goai-diverged");
                diag.epoch = Some(epoch);
                diag.loss_total = Some(loss);
                records.push(diag);
                return Ok(TrainReport {
                    records,
                    divergence: Some(ScgirError::Divergence {
                        phase: "goai",
                        epoch,
                        batch: bi,
                        loss,
                    }),
                });
            }
            let preds = predictions(tape.value(logits));
            hits += preds.iter().zip(&lab).filter(|(p, l)| p == l).count();
            seen += lab.len();
            loss_sum += loss;
            nb += 1;
            let grads = tape.backward(loss_var)?;
            opt.step(model.store_mut(), &params.collect(&grads), lr)?;
            model.apply_stats(&stats);
        }
        let mut rec = MetricsRecord::new(run_id, "goai");
        rec.epoch = Some(epoch);
        channel_fields(&mut rec, &cfg.link, &cfg.channel);
        if nb > 0 {
            rec.loss_total = Some(loss_sum / nb as f64);
            rec.accuracy = Some(hits as f64 / seen as f64);
        }
        records.push(rec);
    }
    Ok(TrainReport {
        records,
        divergence: None,
    })
}

pub(crate) fn gather_rows(t: &Tensor, idx: &[usize]) -> Tensor {
    let d = t.cols();
    let mut data = Vec::with_capacity(idx.len() * d);
    for &i in idx {
        data.extend_from_slice(t.row(i));
    }
    Tensor::new(vec![idx.len(), d], data).expect("row gather keeps shape")
}

/// Accuracy and macro F1 over repeated channel draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSummary {
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub f1_mean: f64,
    pub f1_std: f64,
    pub draws: usize,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, var.sqrt())
}

/// Passes the full latent set through the link `draws` times and classifies.
pub fn evaluate_goai(
    model: &GoaiModel,
    latents: &Tensor,
    labels: &LabelBatch,
    link: &LinkConfig,
    channel: &ChannelConfig,
    draws: usize,
    rng: &mut Rng,
) -> Result<EvalSummary> {
    if draws == 0 {
        return Err(ScgirError::Config("evaluation needs at least one channel draw".into()));
    }
    let mut accs = Vec::with_capacity(draws);
    let mut f1s = Vec::with_capacity(draws);
    for _ in 0..draws {
        let y = simulate_batch(latents, link, channel, rng)?;
        let preds = predictions(&goai_forward(model, &y)?);
        accs.push(accuracy(&preds, &labels.labels)?);
        f1s.push(f1_score(&preds, &labels.labels, Averaging::Macro)?);
    }
    let (accuracy_mean, accuracy_std) = mean_std(&accs);
    let (f1_mean, f1_std) = mean_std(&f1s);
    Ok(EvalSummary {
        accuracy_mean,
        accuracy_std,
        f1_mean,
        f1_std,
        draws,
    })
}

impl EvalSummary {
    pub fn record(&self, run_id: &str, phase: &str, link: &LinkConfig, ch: &ChannelConfig) -> MetricsRecord {
        let mut rec = MetricsRecord::new(run_id, phase);
        channel_fields(&mut rec, link, ch);
        rec.accuracy = Some(self.accuracy_mean);
        rec.accuracy_std = Some(self.accuracy_std);
        rec.f1 = Some(self.f1_mean);
        rec.f1_std = Some(self.f1_std);
        rec
    }
}
