//! Run orchestration: data → encoder → per-ratio classifiers → evaluation grid,
//! plus sweeps and the files every run leaves behind.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::augment::ImageBatch;
use crate::channel::{ChannelConfig, LinkConfig};
use crate::encoder::{correlation_snapshot, train_encoder, CrossCorrMatrix, EncoderConfig, EncoderModel, EncoderTrainConfig};
use crate::error::{Result, ScgirError};
use crate::goai::{evaluate_goai, train_goai, GoaiConfig, GoaiModel, GoaiTrainConfig};
use crate::numeric::{Rng, Tensor};

use super::config::{DatasetSource, ExperimentConfig};
use super::idx::load_idx;
use super::labels::LabelBatch;
use super::metrics::{metrics_csv, MetricsRecord};
use super::synthetic::gen_synthetic;

pub const MANIFEST_SCHEMA: &str = "scgir-manifest/v1";
pub const HEATMAP_SCHEMA: &str = "scgir-heatmap/v1";
pub const ENCODER_CKPT: &str = "encoder.ckpt";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const METRICS_FILE: &str = "metrics.csv";
pub const HEATMAP_PRE: &str = "heatmap_pre.csv";
pub const HEATMAP_POST: &str = "heatmap_post.csv";

const ENCODE_CHUNK: usize = 64;

pub fn goai_ckpt_name(ratio: f64) -> String {
    format!("goai_k{ratio}.ckpt")
}

/// Independent random streams per stage, so stages run separately draw the
/// same numbers as a full run.
pub struct Streams {
    pub data: Rng,
    pub encoder: Rng,
    pub goai: Rng,
    pub eval: Rng,
    pub sweep: Rng,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        let mut root = Rng::seed(seed);
        Streams {
            data: root.split(),
            encoder: root.split(),
            goai: root.split(),
            eval: root.split(),
            sweep: root.split(),
        }
    }
}

/// Train/test split of the configured dataset.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train_x: ImageBatch,
    pub train_y: LabelBatch,
    pub test_x: ImageBatch,
    pub test_y: LabelBatch,
}

pub fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedData> {
    let mut rng = Streams::new(cfg.seed).data;
    let (x, y) = match &cfg.dataset {
        DatasetSource::Synthetic(spec) => {
            let ds = gen_synthetic(spec, &mut rng)?;
            (ds.images, ds.labels)
        }
        DatasetSource::Idx { images, labels } => load_idx(images, labels)?,
    };
    let mut order: Vec<usize> = (0..x.n).collect();
    rng.shuffle(&mut order);
    let n_test = ((x.n as f64 * cfg.test_fraction).round() as usize).clamp(1, x.n.saturating_sub(2));
    if x.n < 3 {
        return Err(ScgirError::Data(format!("dataset has {} samples, need at least 3", x.n)));
    }
    let (test, train) = order.split_at(n_test);
    Ok(PreparedData {
        train_x: x.gather(train),
        train_y: y.gather(train),
        test_x: x.gather(test),
        test_y: y.gather(test),
    })
}

pub fn encoder_config(cfg: &ExperimentConfig, x: &ImageBatch) -> EncoderConfig {
    EncoderConfig {
        in_channels: x.c,
        height: x.h,
        width: x.w,
        conv_channels: cfg.conv_channels.clone(),
        head_dims: cfg.head_dims.clone(),
        tied: cfg.tied,
    }
}

pub fn encoder_train_config(cfg: &ExperimentConfig) -> EncoderTrainConfig {
    EncoderTrainConfig {
        epochs: cfg.encoder_epochs,
        batch_size: cfg.encoder_batch,
        lambda: cfg.lambda,
        eps: cfg.standardize_eps,
        optimizer: cfg.encoder_opt,
        policy: cfg.policy.clone(),
    }
}

pub fn goai_config(cfg: &ExperimentConfig, latent_dim: usize, classes: usize) -> GoaiConfig {
    GoaiConfig {
        input_dim: latent_dim,
        hidden: cfg.goai_hidden.clone(),
        classes,
        prelu_init: cfg.prelu_init,
    }
}

pub fn link_config(cfg: &ExperimentConfig, ratio: f64, latent_dim: usize) -> LinkConfig {
    LinkConfig {
        compression_ratio: ratio,
        source_dims: latent_dim,
        csi: cfg.csi,
        equalize: cfg.equalize,
    }
}

/// Trained encoder with its before/after correlation matrices.
pub struct EncoderStage {
    pub model: EncoderModel,
    pub pre: CrossCorrMatrix,
    pub post: CrossCorrMatrix,
}

fn snapshot_record(run_id: &str, phase: &str, c: &CrossCorrMatrix, cos: f64) -> MetricsRecord {
    let mut r = MetricsRecord::new(run_id, phase);
    r.cosine_sim = Some(cos);
    r.diag_mean = Some(c.diag_mean());
    r.offdiag_abs_mean = Some(c.offdiag_abs_mean());
    r
}

/// Freshly initialized encoder plus its training stream and the stream used
/// for the before/after views (the same views both times).
fn initial_encoder(cfg: &ExperimentConfig, data: &PreparedData) -> Result<(EncoderModel, Rng, Rng)> {
    let mut rng = Streams::new(cfg.seed).encoder;
    let model = EncoderModel::new(encoder_config(cfg, &data.train_x), &mut rng)?;
    let snap = rng.split();
    Ok((model, rng, snap))
}

/// Appends per-epoch records to `records` as they are produced, so a failed
/// run still has them (including the divergence marker).
pub fn train_encoder_stage(
    cfg: &ExperimentConfig,
    data: &PreparedData,
    records: &mut Vec<MetricsRecord>,
) -> Result<EncoderStage> {
    let (mut model, mut rng, snap) = initial_encoder(cfg, data)?;
    let tc = encoder_train_config(cfg);
    let (pre, cos0) = correlation_snapshot(&model, &data.train_x, &tc.policy, tc.eps, &mut snap.clone())?;
    records.push(snapshot_record(&cfg.run_id, "encoder-pre", &pre, cos0));
    let report = train_encoder(&mut model, &data.train_x, &tc, &cfg.run_id, &mut rng)?;
    records.extend(report.records);
    if let Some(e) = report.divergence {
        return Err(e);
    }
    let (post, cos1) = correlation_snapshot(&model, &data.train_x, &tc.policy, tc.eps, &mut snap.clone())?;
    records.push(snapshot_record(&cfg.run_id, "encoder-post", &post, cos1));
    Ok(EncoderStage { model, pre, post })
}

/// Recomputes the before/after matrices for a trained encoder.
pub fn heatmaps(cfg: &ExperimentConfig, data: &PreparedData, trained: &EncoderModel) -> Result<(CrossCorrMatrix, CrossCorrMatrix)> {
    let (init, _, snap) = initial_encoder(cfg, data)?;
    let policy = &cfg.policy;
    let (pre, _) = correlation_snapshot(&init, &data.train_x, policy, cfg.standardize_eps, &mut snap.clone())?;
    let (post, _) = correlation_snapshot(trained, &data.train_x, policy, cfg.standardize_eps, &mut snap.clone())?;
    Ok((pre, post))
}

/// One classifier per compression ratio, trained on the clean training latents
/// with channel draws at the training SNR.
pub fn train_goai_stage(
    cfg: &ExperimentConfig,
    encoder: &EncoderModel,
    data: &PreparedData,
    ratios: &[f64],
    records: &mut Vec<MetricsRecord>,
) -> Result<Vec<(f64, GoaiModel)>> {
    let mut rng = Streams::new(cfg.seed).goai;
    let latents = encoder.encode_all(&data.train_x, ENCODE_CHUNK)?;
    let d = latents.cols();
    let mut out = Vec::with_capacity(ratios.len());
    for &ratio in ratios {
        let mut r = rng.split();
        let mut model = GoaiModel::new(goai_config(cfg, d, data.train_y.classes), &mut r)?;
        let tc = GoaiTrainConfig {
            epochs: cfg.goai_epochs,
            batch_size: cfg.goai_batch,
            optimizer: cfg.goai_opt,
            link: link_config(cfg, ratio, d),
            channel: ChannelConfig::from_snr_db(cfg.channel, cfg.train_snr_db),
        };
        let report = train_goai(&mut model, &latents, &data.train_y, &tc, &cfg.run_id, &mut r)?;
        records.extend(report.records);
        if let Some(e) = report.divergence {
            return Err(e);
        }
        out.push((ratio, model));
    }
    Ok(out)
}

/// Grid point for evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalPoint {
    pub ratio: f64,
    pub channel: ChannelConfig,
}

/// Monte-Carlo accuracy/F1 at each point on the test split.
pub fn evaluate_points(
    cfg: &ExperimentConfig,
    phase: &str,
    encoder: &EncoderModel,
    goais: &[(f64, GoaiModel)],
    data: &PreparedData,
    points: &[EvalPoint],
    rng: &mut Rng,
) -> Result<Vec<MetricsRecord>> {
    let latents: Tensor = encoder.encode_all(&data.test_x, ENCODE_CHUNK)?;
    let d = latents.cols();
    let mut out = Vec::with_capacity(points.len());
    // every point replays the same channel and noise draws
    let base = rng.split();
    for p in points {
        let model = goais
            .iter()
            .find(|(r, _)| *r == p.ratio)
            .map(|(_, m)| m)
            .ok_or_else(|| ScgirError::Config(format!("no classifier trained for compression ratio {}", p.ratio)))?;
        let link = link_config(cfg, p.ratio, d);
        let mut prng = base.clone();
        let s = evaluate_goai(model, &latents, &data.test_y, &link, &p.channel, cfg.eval_draws, &mut prng)?;
        out.push(s.record(&cfg.run_id, phase, &link, &p.channel));
    }
    Ok(out)
}

/// SNR × compression-ratio grid from the config.
pub fn grid_points(cfg: &ExperimentConfig) -> Vec<EvalPoint> {
    let mut pts = Vec::new();
    for &ratio in &cfg.ratio_grid {
        for &snr in &cfg.snr_grid {
            pts.push(EvalPoint {
                ratio,
                channel: ChannelConfig::from_snr_db(cfg.channel, snr),
            });
        }
    }
    pts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Snr,
    Ratio,
    Sigma,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Snr => "snr",
            SweepAxis::Ratio => "ratio",
            SweepAxis::Sigma => "sigma",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "snr" => Ok(SweepAxis::Snr),
            "ratio" => Ok(SweepAxis::Ratio),
            "sigma" => Ok(SweepAxis::Sigma),
            _ => Err(ScgirError::Config(format!("unknown sweep axis {s:?}"))),
        }
    }
}

/// Points along one axis; the other coordinates come from the `sweep.*` keys.
pub fn sweep_points(cfg: &ExperimentConfig, axis: SweepAxis) -> Vec<EvalPoint> {
    match axis {
        SweepAxis::Snr => cfg
            .snr_grid
            .iter()
            .map(|&s| EvalPoint {
                ratio: cfg.sweep_ratio,
                channel: ChannelConfig::from_snr_db(cfg.channel, s),
            })
            .collect(),
        SweepAxis::Ratio => cfg
            .ratio_grid
            .iter()
            .map(|&ratio| EvalPoint {
                ratio,
                channel: ChannelConfig::from_snr_db(cfg.channel, cfg.sweep_snr_db),
            })
            .collect(),
        SweepAxis::Sigma => cfg
            .sigma_grid
            .iter()
            .map(|&v| EvalPoint {
                ratio: cfg.sweep_ratio,
                channel: ChannelConfig::from_noise_var(cfg.channel, v),
            })
            .collect(),
    }
}

/// Ratios whose classifiers a run trains: the grid plus the sweep ratio.
pub fn trained_ratios(cfg: &ExperimentConfig) -> Vec<f64> {
    let mut r = cfg.ratio_grid.clone();
    if !r.contains(&cfg.sweep_ratio) {
        r.push(cfg.sweep_ratio);
    }
    r
}

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(ScgirError::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("missing checkpoint {}", path.display()),
        )))
    }
}

pub fn load_encoder(cfg: &ExperimentConfig, data: &PreparedData) -> Result<EncoderModel> {
    let path = cfg.out_dir.join(ENCODER_CKPT);
    require(&path)?;
    EncoderModel::load(encoder_config(cfg, &data.train_x), &path)
}

pub fn load_goais(
    cfg: &ExperimentConfig,
    latent_dim: usize,
    classes: usize,
    ratios: &[f64],
) -> Result<Vec<(f64, GoaiModel)>> {
    ratios
        .iter()
        .map(|&r| {
            let path = cfg.out_dir.join(goai_ckpt_name(r));
            require(&path)?;
            Ok((r, GoaiModel::load(goai_config(cfg, latent_dim, classes), &path)?))
        })
        .collect()
}

/// Evaluates saved checkpoints along `axis`.
pub fn sweep(cfg: &ExperimentConfig, axis: SweepAxis) -> Result<Vec<MetricsRecord>> {
    let data = prepare_data(cfg)?;
    let encoder = load_encoder(cfg, &data)?;
    let points = sweep_points(cfg, axis);
    let mut ratios: Vec<f64> = Vec::new();
    for p in &points {
        if !ratios.contains(&p.ratio) {
            ratios.push(p.ratio);
        }
    }
    let goais = load_goais(cfg, encoder.config().latent_dim(), data.train_y.classes, &ratios)?;
    let mut rng = Streams::new(cfg.seed).sweep;
    evaluate_points(cfg, &format!("sweep-{}", axis.name()), &encoder, &goais, &data, &points, &mut rng)
}

/// CSV of a `d × d` matrix, row-major, after a header line with `d` and the digest.
pub fn heatmap_csv(c: &CrossCorrMatrix, config_digest: &str) -> String {
    let d = c.dim();
    let mut out = String::new();
    writeln!(out, "# {HEATMAP_SCHEMA} d={d} config_digest={config_digest}").unwrap();
    for i in 0..d {
        let row: Vec<String> = c.values.row(i).iter().map(f64::to_string).collect();
        writeln!(out, "{}", row.join(",")).unwrap();
    }
    out
}

pub fn export_heatmap_data(c: &CrossCorrMatrix, config_digest: &str, path: &Path) -> Result<()> {
    std::fs::write(path, heatmap_csv(c, config_digest))?;
    Ok(())
}

/// Reads a heatmap file back into a matrix.
pub fn parse_heatmap(text: &str) -> Result<CrossCorrMatrix> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    let d: usize = header
        .split_whitespace()
        .find_map(|t| t.strip_prefix("d="))
        .and_then(|v| v.parse().ok())
        .ok_or(ScgirError::Format {
            offset: 0,
            msg: "heatmap header lacks d=".into(),
        })?;
    let mut data = Vec::with_capacity(d * d);
    for line in lines {
        for cell in line.split(',') {
            data.push(cell.parse::<f64>().map_err(|_| ScgirError::Format {
                offset: data.len(),
                msg: format!("bad heatmap cell {cell:?}"),
            })?);
        }
    }
    CrossCorrMatrix::new(Tensor::new(vec![d, d], data)?)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Single writer for a run directory; remembers the digest of every file written.
pub struct RunWriter {
    dir: PathBuf,
    files: BTreeMap<String, String>,
}

impl RunWriter {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(RunWriter {
            dir: dir.to_path_buf(),
            files: BTreeMap::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes)?;
        self.files.insert(name.to_string(), sha256_hex(bytes));
        Ok(path)
    }

    /// Records an existing file (written elsewhere) by reading it back.
    pub fn register(&mut self, name: &str) -> Result<()> {
        let bytes = std::fs::read(self.dir.join(name))?;
        self.files.insert(name.to_string(), sha256_hex(&bytes));
        Ok(())
    }

    /// Registers every regular file already in the directory except the manifest.
    pub fn register_existing(&mut self) -> Result<()> {
        let mut names = Vec::new();
        for entry in std::fs::read_dir(&self.dir)? {
            let entry = entry?;
            if entry.file_type()?.is_file() {
                if let Some(name) = entry.file_name().to_str() {
                    if name != MANIFEST_FILE {
                        names.push(name.to_string());
                    }
                }
            }
        }
        for n in names {
            self.register(&n)?;
        }
        Ok(())
    }

    pub fn files(&self) -> &BTreeMap<String, String> {
        &self.files
    }

    /// Writes the manifest: status, config listing and file digests.
    pub fn finish(&mut self, cfg: &ExperimentConfig, failure: Option<&ScgirError>) -> Result<PathBuf> {
        let text = manifest_text(cfg, &self.files, failure);
        let path = self.dir.join(MANIFEST_FILE);
        std::fs::write(&path, text)?;
        Ok(path)
    }
}

pub fn manifest_text(cfg: &ExperimentConfig, files: &BTreeMap<String, String>, failure: Option<&ScgirError>) -> String {
    let mut out = String::new();
    writeln!(out, "schema = {MANIFEST_SCHEMA}").unwrap();
    match failure {
        None => writeln!(out, "status = ok").unwrap(),
        Some(e) => {
            writeln!(out, "status = FAILED").unwrap();
            writeln!(out, "error = {}", e.to_string().replace('\n', " ")).unwrap();
        }
    }
    writeln!(out, "config_digest = {}", cfg.digest()).unwrap();
    for (k, v) in cfg.entries() {
        writeln!(out, "config.{k} = {v}").unwrap();
    }
    for (name, digest) in files {
        writeln!(out, "file.{name} = sha256:{digest}").unwrap();
    }
    out
}

/// Paths and headline numbers of a finished run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub records: Vec<MetricsRecord>,
    pub files: BTreeMap<String, String>,
}

/// Full run: train encoder, train one classifier per ratio, evaluate the grid.
/// On failure the partial metrics and a FAILED manifest are still written.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let mut w = RunWriter::create(&cfg.out_dir)?;
    let mut records = Vec::new();
    let outcome = run_stages(cfg, &mut w, &mut records);
    let digest = cfg.digest();
    let csv = w.write(METRICS_FILE, metrics_csv(&records, &digest).as_bytes());
    let failure = outcome.err().or(csv.err());
    w.finish(cfg, failure.as_ref())?;
    match failure {
        Some(e) => Err(e),
        None => Ok(RunSummary {
            dir: cfg.out_dir.clone(),
            records,
            files: w.files().clone(),
        }),
    }
}

fn run_stages(cfg: &ExperimentConfig, w: &mut RunWriter, records: &mut Vec<MetricsRecord>) -> Result<()> {
    let digest = cfg.digest();
    let data = prepare_data(cfg)?;
    let enc = train_encoder_stage(cfg, &data, records)?;
    w.write(HEATMAP_PRE, heatmap_csv(&enc.pre, &digest).as_bytes())?;
    w.write(HEATMAP_POST, heatmap_csv(&enc.post, &digest).as_bytes())?;
    w.write(ENCODER_CKPT, &encoder_checkpoint_bytes(&enc.model))?;
    let ratios = trained_ratios(cfg);
    let goais = train_goai_stage(cfg, &enc.model, &data, &ratios, records)?;
    for (r, m) in &goais {
        w.write(&goai_ckpt_name(*r), &goai_checkpoint_bytes(m))?;
    }
    let mut rng = Streams::new(cfg.seed).eval;
    records.extend(evaluate_points(cfg, "eval", &enc.model, &goais, &data, &grid_points(cfg), &mut rng)?);
    Ok(())
}

pub fn encoder_checkpoint_bytes(m: &EncoderModel) -> Vec<u8> {
    crate::encoder::checkpoint::encode_checkpoint(m.store(), &m.config().digest())
}

pub fn goai_checkpoint_bytes(m: &GoaiModel) -> Vec<u8> {
    crate::encoder::checkpoint::encode_checkpoint(m.store(), &m.config().digest())
}
