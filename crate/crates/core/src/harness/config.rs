use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::augment::{AugmentPolicy, ViewParams};
use crate::channel::ChannelModel;
use crate::error::{Result, ScgirError};
use crate::numeric::{OptimizerConfig, OptimizerKind, STANDARDIZE_EPS};

use super::synthetic::SyntheticSpec;

/// Where the images come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Synthetic(SyntheticSpec),
    Idx { images: PathBuf, labels: PathBuf },
}

/// Every setting a run depends on. Serialized as flat `key = value` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub run_id: String,
    pub out_dir: PathBuf,
    pub dataset: DatasetSource,
    /// Synthetic settings, kept even when the dataset is IDX so the listing is complete.
    pub synthetic: SyntheticSpec,
    pub idx_images: PathBuf,
    pub idx_labels: PathBuf,
    pub test_fraction: f64,
    pub policy: AugmentPolicy,
    pub conv_channels: Vec<usize>,
    pub head_dims: Vec<usize>,
    pub tied: bool,
    pub encoder_epochs: usize,
    pub encoder_batch: usize,
    pub lambda: f64,
    pub standardize_eps: f64,
    pub encoder_opt: OptimizerConfig,
    pub goai_hidden: Vec<usize>,
    pub prelu_init: f64,
    pub goai_epochs: usize,
    pub goai_batch: usize,
    pub goai_opt: OptimizerConfig,
    pub equalize: bool,
    pub csi: bool,
    pub channel: ChannelModel,
    pub train_snr_db: f64,
    pub snr_grid: Vec<f64>,
    pub ratio_grid: Vec<f64>,
    pub sigma_grid: Vec<f64>,
    pub eval_draws: usize,
    pub sweep_ratio: f64,
    pub sweep_snr_db: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 7,
            run_id: "run".into(),
            out_dir: PathBuf::from("out"),
            dataset: DatasetSource::Synthetic(SyntheticSpec::default()),
            synthetic: SyntheticSpec::default(),
            idx_images: PathBuf::new(),
            idx_labels: PathBuf::new(),
            test_fraction: 0.25,
            policy: AugmentPolicy::default(),
            conv_channels: vec![8, 16, 32],
            head_dims: vec![64, 128, 256],
            tied: true,
            encoder_epochs: 200,
            encoder_batch: 32,
            lambda: 5e-4,
            standardize_eps: STANDARDIZE_EPS,
            encoder_opt: OptimizerConfig::adam(1e-4),
            goai_hidden: vec![64, 64, 64],
            prelu_init: 0.25,
            goai_epochs: 100,
            goai_batch: 32,
            goai_opt: OptimizerConfig::adam(1e-3).with_cosine(0.0),
            equalize: true,
            csi: true,
            channel: ChannelModel::Rayleigh,
            train_snr_db: 10.0,
            snr_grid: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            ratio_grid: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
            sigma_grid: vec![0.1, 0.01, 0.001],
            eval_draws: 20,
            sweep_ratio: 0.6,
            sweep_snr_db: 5.0,
        }
    }
}

fn bad(key: &str, value: &str, what: &str) -> ScgirError {
    ScgirError::Config(format!("{key} = {value:?}: expected {what}"))
}

fn p_f64(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v.parse().map_err(|_| bad(key, v, "a number"))?;
    if !x.is_finite() {
        return Err(bad(key, v, "a finite number"));
    }
    Ok(x)
}

fn p_usize(key: &str, v: &str) -> Result<usize> {
    v.parse().map_err(|_| bad(key, v, "a non-negative integer"))
}

fn p_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(bad(key, v, "true or false")),
    }
}

fn p_list<T>(key: &str, v: &str, f: fn(&str, &str) -> Result<T>) -> Result<Vec<T>> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| f(key, s.trim())).collect()
}

fn p_pair(key: &str, v: &str) -> Result<(f64, f64)> {
    match p_list(key, v, p_f64)?.as_slice() {
        &[a, b] => Ok((a, b)),
        _ => Err(bad(key, v, "two comma-separated numbers")),
    }
}

fn list<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn set_view(view: &mut ViewParams, field: &str, key: &str, v: &str) -> Result<()> {
    let x = p_f64(key, v)?;
    match field {
        "crop_prob" => view.crop_prob = x,
        "flip_prob" => view.flip_prob = x,
        "brightness" => view.jitter.brightness = x,
        "contrast" => view.jitter.contrast = x,
        "saturation" => view.jitter.saturation = x,
        "hue" => view.jitter.hue = x,
        "grayscale_prob" => view.grayscale_prob = x,
        "blur_prob" => view.blur_prob = x,
        "solarize_prob" => view.solarize_prob = x,
        _ => return Err(ScgirError::Config(format!("unknown config key {key:?}"))),
    }
    Ok(())
}

fn view_entries(prefix: &str, v: &ViewParams, out: &mut Vec<(String, String)>) {
    let j = v.jitter;
    for (k, x) in [
        ("crop_prob", v.crop_prob),
        ("flip_prob", v.flip_prob),
        ("brightness", j.brightness),
        ("contrast", j.contrast),
        ("saturation", j.saturation),
        ("hue", j.hue),
        ("grayscale_prob", v.grayscale_prob),
        ("blur_prob", v.blur_prob),
        ("solarize_prob", v.solarize_prob),
    ] {
        out.push((format!("{prefix}.{k}"), x.to_string()));
    }
}

fn set_opt(opt: &mut OptimizerConfig, field: &str, key: &str, v: &str) -> Result<()> {
    match field {
        "optimizer" => {
            opt.kind = match v {
                "adam" => OptimizerKind::Adam,
                "sgd" => OptimizerKind::Sgd,
                _ => return Err(bad(key, v, "adam or sgd")),
            }
        }
        "lr" => opt.lr = p_f64(key, v)?,
        "beta1" => opt.beta1 = p_f64(key, v)?,
        "beta2" => opt.beta2 = p_f64(key, v)?,
        "adam_eps" => opt.eps = p_f64(key, v)?,
        "cosine" => opt.cosine = p_bool(key, v)?,
        "lr_min" => opt.lr_min = p_f64(key, v)?,
        _ => return Err(ScgirError::Config(format!("unknown config key {key:?}"))),
    }
    Ok(())
}

fn opt_entries(prefix: &str, o: &OptimizerConfig, out: &mut Vec<(String, String)>) {
    let kind = match o.kind {
        OptimizerKind::Adam => "adam",
        OptimizerKind::Sgd => "sgd",
    };
    out.push((format!("{prefix}.optimizer"), kind.into()));
    for (k, x) in [
        ("lr", o.lr),
        ("beta1", o.beta1),
        ("beta2", o.beta2),
        ("adam_eps", o.eps),
    ] {
        out.push((format!("{prefix}.{k}"), x.to_string()));
    }
    out.push((format!("{prefix}.cosine"), o.cosine.to_string()));
    out.push((format!("{prefix}.lr_min"), o.lr_min.to_string()));
}

impl ExperimentConfig {
    /// Reads a config file on top of the defaults.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ScgirError::Config(format!("line {}: expected `key = value`", no + 1)))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(ScgirError::Config(format!("line {}: duplicate key {key:?}", no + 1)));
            }
            cfg.set(key, value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one `key = value` pair.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        if let Some(field) = key.strip_prefix("augment.view1.") {
            return set_view(&mut self.policy.view1, field, key, v);
        }
        if let Some(field) = key.strip_prefix("augment.view2.") {
            return set_view(&mut self.policy.view2, field, key, v);
        }
        if let Some(field) = key.strip_prefix("encoder.") {
            if let Ok(()) = set_opt(&mut self.encoder_opt, field, key, v) {
                return Ok(());
            }
        }
        if let Some(field) = key.strip_prefix("goai.") {
            if let Ok(()) = set_opt(&mut self.goai_opt, field, key, v) {
                return Ok(());
            }
        }
        let s = &mut self.synthetic;
        match key {
            "seed" => self.seed = v.parse().map_err(|_| bad(key, v, "an unsigned integer"))?,
            "run_id" => {
                if v.is_empty() || v.contains([',', '\n', '"']) {
                    return Err(bad(key, v, "a non-empty id without commas or quotes"));
                }
                self.run_id = v.into()
            }
            "out_dir" => self.out_dir = PathBuf::from(v),
            "dataset" => {
                self.dataset = match v {
                    "synthetic" => DatasetSource::Synthetic(self.synthetic.clone()),
                    "idx" => DatasetSource::Idx {
                        images: self.idx_images.clone(),
                        labels: self.idx_labels.clone(),
                    },
                    _ => return Err(bad(key, v, "synthetic or idx")),
                }
            }
            "data.classes" => s.classes = p_usize(key, v)?,
            "data.per_class" => s.per_class = p_usize(key, v)?,
            "data.channels" => s.channels = p_usize(key, v)?,
            "data.height" => s.height = p_usize(key, v)?,
            "data.width" => s.width = p_usize(key, v)?,
            "data.noise" => s.noise = p_f64(key, v)?,
            "data.nuisance" => s.nuisance = p_bool(key, v)?,
            "data.perceptron_epochs" => s.perceptron_epochs = p_usize(key, v)?,
            "data.idx_images" => self.idx_images = PathBuf::from(v),
            "data.idx_labels" => self.idx_labels = PathBuf::from(v),
            "data.test_fraction" => self.test_fraction = p_f64(key, v)?,
            "augment.crop_area" => self.policy.crop_area = p_pair(key, v)?,
            "augment.crop_aspect" => self.policy.crop_aspect = p_pair(key, v)?,
            "augment.blur_kernel" => {
                self.policy.blur_kernel = if v == "auto" { None } else { Some(p_usize(key, v)?) }
            }
            "augment.blur_sigma" => self.policy.blur_sigma = p_pair(key, v)?,
            "augment.luma" => match p_list(key, v, p_f64)?.as_slice() {
                &[r, g, b] => self.policy.luma = [r, g, b],
                _ => return Err(bad(key, v, "three comma-separated weights")),
            },
            "encoder.conv_channels" => self.conv_channels = p_list(key, v, p_usize)?,
            "encoder.head_dims" => self.head_dims = p_list(key, v, p_usize)?,
            "encoder.tied" => self.tied = p_bool(key, v)?,
            "encoder.epochs" => self.encoder_epochs = p_usize(key, v)?,
            "encoder.batch_size" => self.encoder_batch = p_usize(key, v)?,
            "encoder.lambda" => self.lambda = p_f64(key, v)?,
            "encoder.standardize_eps" => self.standardize_eps = p_f64(key, v)?,
            "goai.hidden" => self.goai_hidden = p_list(key, v, p_usize)?,
            "goai.prelu_init" => self.prelu_init = p_f64(key, v)?,
            "goai.epochs" => self.goai_epochs = p_usize(key, v)?,
            "goai.batch_size" => self.goai_batch = p_usize(key, v)?,
            "goai.equalize" => self.equalize = p_bool(key, v)?,
            "goai.train_snr_db" => self.train_snr_db = p_f64(key, v)?,
            "channel.model" => self.channel = ChannelModel::parse(v)?,
            "channel.csi" => self.csi = p_bool(key, v)?,
            "eval.snr_db" => self.snr_grid = p_list(key, v, p_f64)?,
            "eval.compression_ratio" => self.ratio_grid = p_list(key, v, p_f64)?,
            "eval.sigma_n2" => self.sigma_grid = p_list(key, v, p_f64)?,
            "eval.draws" => self.eval_draws = p_usize(key, v)?,
            "sweep.compression_ratio" => self.sweep_ratio = p_f64(key, v)?,
            "sweep.snr_db" => self.sweep_snr_db = p_f64(key, v)?,
            _ => return Err(ScgirError::Config(format!("unknown config key {key:?}"))),
        }
        // keep the active dataset in step with the individual keys
        match &mut self.dataset {
            DatasetSource::Synthetic(spec) => *spec = self.synthetic.clone(),
            DatasetSource::Idx { images, labels } => {
                *images = self.idx_images.clone();
                *labels = self.idx_labels.clone();
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.synthetic.validate()?;
        self.policy.validate()?;
        if let DatasetSource::Idx { images, labels } = &self.dataset {
            if images.as_os_str().is_empty() || labels.as_os_str().is_empty() {
                return Err(ScgirError::Config("dataset = idx needs data.idx_images and data.idx_labels".into()));
            }
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(ScgirError::Config(format!("data.test_fraction {} not in (0, 1)", self.test_fraction)));
        }
        if self.head_dims.is_empty() || self.head_dims.contains(&0) || self.conv_channels.contains(&0) {
            return Err(ScgirError::Config("encoder layer widths must be nonzero and the head non-empty".into()));
        }
        if self.goai_hidden.contains(&0) {
            return Err(ScgirError::Config("goai.hidden widths must be nonzero".into()));
        }
        if self.encoder_batch < 2 || self.goai_batch < 2 {
            return Err(ScgirError::Config("batch sizes must be >= 2".into()));
        }
        if self.eval_draws == 0 {
            return Err(ScgirError::Config("eval.draws must be >= 1".into()));
        }
        for &r in self.ratio_grid.iter().chain([&self.sweep_ratio]) {
            if !(r > 0.0 && r <= 1.0) {
                return Err(ScgirError::Config(format!("compression ratio {r} not in (0, 1]")));
            }
        }
        if let Some(s) = self.sigma_grid.iter().find(|s| **s < 0.0) {
            return Err(ScgirError::Config(format!("noise power {s} is negative")));
        }
        for (name, o) in [("encoder", &self.encoder_opt), ("goai", &self.goai_opt)] {
            if !(o.lr > 0.0) || o.lr_min < 0.0 {
                return Err(ScgirError::Config(format!("{name}.lr must be > 0 and {name}.lr_min >= 0")));
            }
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 || !(self.standardize_eps > 0.0) {
            return Err(ScgirError::Config("encoder.lambda must be >= 0 and standardize_eps > 0".into()));
        }
        if self.equalize && !self.csi {
            return Err(ScgirError::Config("goai.equalize needs channel.csi = true".into()));
        }
        Ok(())
    }

    /// Every key with its effective value, in a fixed order.
    pub fn entries(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::new();
        let mut push = |k: &str, v: String| out.push((k.to_string(), v));
        let s = &self.synthetic;
        push("seed", self.seed.to_string());
        push("run_id", self.run_id.clone());
        push("out_dir", self.out_dir.display().to_string());
        push(
            "dataset",
            match self.dataset {
                DatasetSource::Synthetic(_) => "synthetic",
                DatasetSource::Idx { .. } => "idx",
            }
            .into(),
        );
        push("data.classes", s.classes.to_string());
        push("data.per_class", s.per_class.to_string());
        push("data.channels", s.channels.to_string());
        push("data.height", s.height.to_string());
        push("data.width", s.width.to_string());
        push("data.noise", s.noise.to_string());
        push("data.nuisance", s.nuisance.to_string());
        push("data.perceptron_epochs", s.perceptron_epochs.to_string());
        push("data.idx_images", self.idx_images.display().to_string());
        push("data.idx_labels", self.idx_labels.display().to_string());
        push("data.test_fraction", self.test_fraction.to_string());
        let p = &self.policy;
        push("augment.crop_area", list(&[p.crop_area.0, p.crop_area.1]));
        push("augment.crop_aspect", list(&[p.crop_aspect.0, p.crop_aspect.1]));
        push(
            "augment.blur_kernel",
            p.blur_kernel.map_or_else(|| "auto".into(), |k| k.to_string()),
        );
        push("augment.blur_sigma", list(&[p.blur_sigma.0, p.blur_sigma.1]));
        push("augment.luma", list(&p.luma));
        push("encoder.conv_channels", list(&self.conv_channels));
        push("encoder.head_dims", list(&self.head_dims));
        push("encoder.tied", self.tied.to_string());
        push("encoder.epochs", self.encoder_epochs.to_string());
        push("encoder.batch_size", self.encoder_batch.to_string());
        push("encoder.lambda", self.lambda.to_string());
        push("encoder.standardize_eps", self.standardize_eps.to_string());
        push("goai.hidden", list(&self.goai_hidden));
        push("goai.prelu_init", self.prelu_init.to_string());
        push("goai.epochs", self.goai_epochs.to_string());
        push("goai.batch_size", self.goai_batch.to_string());
        push("goai.equalize", self.equalize.to_string());
        push("goai.train_snr_db", self.train_snr_db.to_string());
        push("channel.model", self.channel.name().into());
        push("channel.csi", self.csi.to_string());
        push("eval.snr_db", list(&self.snr_grid));
        push("eval.compression_ratio", list(&self.ratio_grid));
        push("eval.sigma_n2", list(&self.sigma_grid));
        push("eval.draws", self.eval_draws.to_string());
        push("sweep.compression_ratio", self.sweep_ratio.to_string());
        push("sweep.snr_db", self.sweep_snr_db.to_string());
        view_entries("augment.view1", &p.view1, &mut out);
        view_entries("augment.view2", &p.view2, &mut out);
        opt_entries("encoder", &self.encoder_opt, &mut out);
        opt_entries("goai", &self.goai_opt, &mut out);
        out
    }

    /// Canonical text form; parsing it yields the same config.
    pub fn to_text(&self) -> String {
        self.entries().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Hex sha256 of the canonical text, excluding the output directory so
    /// that reruns elsewhere carry the same digest.
    pub fn digest(&self) -> String {
        let text: String = self
            .entries()
            .iter()
            .filter(|(k, _)| k != "out_dir")
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect();
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_text_round_trips() {
        let mut cfg = ExperimentConfig::default();
        cfg.set("encoder.head_dims", "32,16").unwrap();
        cfg.set("augment.view2.solarize_prob", "0.3").unwrap();
        cfg.set("goai.optimizer", "sgd").unwrap();
        cfg.set("augment.blur_kernel", "5").unwrap();
        let back = ExperimentConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_text(), cfg.to_text());
        assert_eq!(ExperimentConfig::parse("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn comments_blank_lines_and_lists() {
        let cfg = ExperimentConfig::parse("# header\n\nseed = 11  # trailing\neval.snr_db = 0, 5 ,10\n").unwrap();
        assert_eq!(cfg.seed, 11);
        assert_eq!(cfg.snr_grid, vec![0.0, 5.0, 10.0]);
    }

    #[test]
    fn errors_are_config_errors() {
        for text in [
            "nonsense = 1",
            "seed",
            "seed = x",
            "seed = 1\nseed = 2",
            "eval.compression_ratio = 0.1,1.5",
            "augment.view1.flip_prob = 2",
            "dataset = idx",
            "encoder.optimizer = rmsprop",
            "channel.model = rician",
        ] {
            let err = ExperimentConfig::parse(text).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text}: {err}");
        }
    }

    #[test]
    fn digest_ignores_out_dir_only() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.out_dir = PathBuf::from("elsewhere");
        assert_eq!(a.digest(), b.digest());
        b.seed = 8;
        assert_ne!(a.digest(), b.digest());
    }

    #[test]
    fn listing_covers_every_key_once() {
        let entries = ExperimentConfig::default().entries();
        let keys: std::collections::HashSet<_> = entries.iter().map(|(k, _)| k.clone()).collect();
        assert_eq!(keys.len(), entries.len());
        let mut cfg = ExperimentConfig::default();
        for (k, v) in &entries {
            cfg.set(k, v).unwrap();
        }
    }
}
