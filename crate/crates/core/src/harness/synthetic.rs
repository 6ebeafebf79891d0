use crate::augment::ImageBatch;
use crate::error::{Result, ScgirError};
use crate::numeric::Rng;

use super::labels::LabelBatch;

/// Parameters of the synthetic image classification task.
///
/// Every class owns a fixed pattern (an oriented grating plus a soft blob);
/// samples are the pattern with optional per-sample contrast/brightness
/// nuisance and additive Gaussian pixel noise.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub per_class: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub noise: f64,
    pub nuisance: bool,
    /// Perceptron epochs allowed for the separability check.
    pub perceptron_epochs: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            classes: 4,
            per_class: 128,
            channels: 1,
            height: 16,
            width: 16,
            noise: 0.1,
            nuisance: true,
            perceptron_epochs: 500,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 || self.per_class == 0 {
            return Err(ScgirError::Config("synthetic data needs >= 2 classes and >= 1 sample per class".into()));
        }
        if self.channels != 1 && self.channels != 3 {
            return Err(ScgirError::Config(format!("channels must be 1 or 3, got {}", self.channels)));
        }
        if self.height < 4 || self.width < 4 {
            return Err(ScgirError::Config("synthetic images must be at least 4x4".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(ScgirError::Config(format!("noise level {} invalid", self.noise)));
        }
        Ok(())
    }
}

/// Generated images, labels and the evidence of linear separability.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub images: ImageBatch,
    pub labels: LabelBatch,
    pub patterns: Vec<Vec<f64>>,
    /// Epoch at which the perceptron first made zero mistakes.
    pub perceptron_epochs: usize,
    /// Noise level below which class separation holds with a 4-sigma margin.
    pub noise_threshold: f64,
}

fn class_patterns(spec: &SyntheticSpec, rng: &mut Rng) -> Vec<Vec<f64>> {
    let (c, h, w) = (spec.channels, spec.height, spec.width);
    (0..spec.classes)
        .map(|k| {
            let theta = std::f64::consts::PI * (k as f64 + rng.uniform_range(0.1, 0.4)) / spec.classes as f64;
            let freq = rng.uniform_range(1.5, 3.0);
            let phase = rng.uniform_range(0.0, std::f64::consts::TAU);
            let (by, bx) = (rng.uniform_range(0.25, 0.75) * h as f64, rng.uniform_range(0.25, 0.75) * w as f64);
            let radius = rng.uniform_range(0.15, 0.3) * h.min(w) as f64;
            let tint: Vec<f64> = (0..c).map(|_| rng.uniform_range(0.7, 1.0)).collect();
            let mut p = vec![0.0; c * h * w];
            for ch in 0..c {
                for y in 0..h {
                    for x in 0..w {
                        let u = (x as f64 * theta.cos() + y as f64 * theta.sin()) / w as f64;
                        let grating = (std::f64::consts::TAU * freq * u + phase).sin();
                        let d2 = (y as f64 - by).powi(2) + (x as f64 - bx).powi(2);
                        let blob = (-d2 / (2.0 * radius * radius)).exp();
                        p[(ch * h + y) * w + x] = (0.5 + tint[ch] * (0.25 * grating + 0.2 * blob - 0.1)).clamp(0.05, 0.95);
                    }
                }
            }
            p
        })
        .collect()
}

/// Multiclass perceptron on raw pixels (plus bias). Returns the first epoch
/// (1-based) in which every sample's true class strictly out-scores all
/// rivals, or `None` within `max_epochs`.
pub fn perceptron_separable(images: &ImageBatch, labels: &LabelBatch, max_epochs: usize) -> Option<usize> {
    let len = images.image_len();
    let dim = len + 1;
    let mut w = vec![0.0; labels.classes * dim];
    let mut f = vec![1.0; dim];
    for epoch in 1..=max_epochs {
        let mut mistakes = 0;
        for i in 0..images.n {
            f[..len].copy_from_slice(&images.data[i * len..(i + 1) * len]);
            let scores: Vec<f64> = w.chunks(dim).map(|wk| wk.iter().zip(&f).map(|(a, b)| a * b).sum()).collect();
            let truth = labels.labels[i];
            let rival = (0..labels.classes)
                .filter(|&k| k != truth)
                .max_by(|&a, &b| scores[a].total_cmp(&scores[b]))
                .expect("at least two classes");
            if scores[rival] >= scores[truth] {
                mistakes += 1;
                for (j, v) in f.iter().enumerate() {
                    w[truth * dim + j] += v;
                    w[rival * dim + j] -= v;
                }
            }
        }
        if mistakes == 0 {
            return Some(epoch);
        }
    }
    None
}

/// Deterministic balanced dataset; sample `i` belongs to class `i % classes`.
pub fn gen_synthetic(spec: &SyntheticSpec, rng: &mut Rng) -> Result<SyntheticDataset> {
    spec.validate()?;
    let patterns = class_patterns(spec, rng);
    let len = spec.channels * spec.height * spec.width;
    let n = spec.classes * spec.per_class;
    let mut data = Vec::with_capacity(n * len);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let k = i % spec.classes;
        let (gain, offset) = if spec.nuisance {
            (rng.uniform_range(0.8, 1.2), rng.uniform_range(-0.1, 0.1))
        } else {
            (1.0, 0.0)
        };
        for &p in &patterns[k] {
            let v = 0.5 + gain * (p - 0.5) + offset + spec.noise * rng.normal();
            data.push(v.clamp(0.0, 1.0));
        }
        labels.push(k);
    }
    let images = ImageBatch::new(n, spec.channels, spec.height, spec.width, data)?;
    let labels = LabelBatch::new(labels, spec.classes)?;
    let d_min = (0..spec.classes)
        .flat_map(|a| (a + 1..spec.classes).map(move |b| (a, b)))
        .map(|(a, b)| {
            patterns[a]
                .iter()
                .zip(&patterns[b])
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt()
        })
        .fold(f64::INFINITY, f64::min);
    let noise_threshold = d_min / 8.0;
    let epochs = perceptron_separable(&images, &labels, spec.perceptron_epochs).ok_or_else(|| {
        ScgirError::Data(format!(
            "synthetic data not linearly separable within {} perceptron epochs (noise {}, threshold {noise_threshold:.4})",
            spec.perceptron_epochs, spec.noise
        ))
    })?;
    Ok(SyntheticDataset {
        images,
        labels,
        patterns,
        perceptron_epochs: epochs,
        noise_threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_and_sized() {
        let spec = SyntheticSpec {
            per_class: 10,
            ..SyntheticSpec::default()
        };
        let ds = gen_synthetic(&spec, &mut Rng::seed(1)).unwrap();
        assert_eq!(ds.images.n, 40);
        for k in 0..4 {
            assert_eq!(ds.labels.labels.iter().filter(|&&l| l == k).count(), 10);
        }
        assert!(ds.images.data.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn same_seed_same_bytes() {
        let spec = SyntheticSpec {
            per_class: 8,
            ..SyntheticSpec::default()
        };
        let a = gen_synthetic(&spec, &mut Rng::seed(5)).unwrap();
        let b = gen_synthetic(&spec, &mut Rng::seed(5)).unwrap();
        assert_eq!(a.images, b.images);
        assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn noiseless_two_class_separable_quickly() {
        let spec = SyntheticSpec {
            classes: 2,
            per_class: 20,
            noise: 0.0,
            nuisance: false,
            perceptron_epochs: 20,
            ..SyntheticSpec::default()
        };
        let ds = gen_synthetic(&spec, &mut Rng::seed(2)).unwrap();
        assert!(ds.perceptron_epochs <= 20);
        assert!(ds.noise_threshold > 0.0);
    }

    #[test]
    fn overwhelming_noise_fails_with_threshold() {
        let spec = SyntheticSpec {
            per_class: 64,
            noise: 5.0,
            perceptron_epochs: 3,
            ..SyntheticSpec::default()
        };
        let err = gen_synthetic(&spec, &mut Rng::seed(3)).unwrap_err().to_string();
        assert!(err.contains("threshold"), "{err}");
    }

    #[test]
    fn xor_labels_not_separable() {
        // four 1-pixel-varying images with XOR labels
        let px = |a: f64, b: f64| {
            let mut v = vec![0.0; 16];
            v[0] = a;
            v[1] = b;
            v
        };
        let data = [px(0.0, 0.0), px(1.0, 1.0), px(0.0, 1.0), px(1.0, 0.0)].concat();
        let images = ImageBatch::new(4, 1, 4, 4, data).unwrap();
        let labels = LabelBatch::new(vec![0, 0, 1, 1], 2).unwrap();
        assert_eq!(perceptron_separable(&images, &labels, 100), None);
    }
}
