//! Multi-view transformation: two independently distorted views per image.
//!
//! Each view runs, in order: random crop, horizontal flip, color jitter,
//! color drop, Gaussian blur and solarization, each gated by the view's own
//! probability.

mod image;
mod ops;

pub use image::{Image, ImageBatch};
pub use ops::{
    adjust_brightness, adjust_contrast, adjust_hue, adjust_saturation, color_drop, color_jitter, crop_resize,
    cubic_weight, default_blur_kernel, gaussian_blur, gaussian_blur_fixed, gaussian_kernel, hflip, random_crop,
    sample_crop_box, solarize, solarize_value, CropBox, JitterStrength, BT601_LUMA,
};

use crate::error::{Result, ScgirError};
use crate::numeric::Rng;

/// Probabilities and intensities for one view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewParams {
    pub crop_prob: f64,
    pub flip_prob: f64,
    pub jitter: JitterStrength,
    pub grayscale_prob: f64,
    pub blur_prob: f64,
    pub solarize_prob: f64,
}

impl ViewParams {
    pub fn identity() -> Self {
        ViewParams {
            crop_prob: 0.0,
            flip_prob: 0.0,
            jitter: JitterStrength {
                brightness: 0.0,
                contrast: 0.0,
                saturation: 0.0,
                hue: 0.0,
            },
            grayscale_prob: 0.0,
            blur_prob: 0.0,
            solarize_prob: 0.0,
        }
    }

    fn validate(&self, view: &str) -> Result<()> {
        let probs = [
            ("crop_prob", self.crop_prob),
            ("flip_prob", self.flip_prob),
            ("grayscale_prob", self.grayscale_prob),
            ("blur_prob", self.blur_prob),
            ("solarize_prob", self.solarize_prob),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(ScgirError::Config(format!("{view}.{name} = {p} not in [0, 1]")));
            }
        }
        let j = self.jitter;
        for (name, v) in [
            ("brightness", j.brightness),
            ("contrast", j.contrast),
            ("saturation", j.saturation),
            ("hue", j.hue),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ScgirError::Config(format!("{view}.{name} = {v} must be >= 0")));
            }
        }
        if j.hue > 0.5 {
            return Err(ScgirError::Config(format!("{view}.hue = {} exceeds half a turn", j.hue)));
        }
        Ok(())
    }
}

/// Augmentation settings for both views plus the shared geometric ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentPolicy {
    pub view1: ViewParams,
    pub view2: ViewParams,
    pub crop_area: (f64, f64),
    pub crop_aspect: (f64, f64),
    /// Odd blur kernel size; `None` derives it from the image size.
    pub blur_kernel: Option<usize>,
    pub blur_sigma: (f64, f64),
    pub luma: [f64; 3],
}

impl Default for AugmentPolicy {
    /// Crop 1.0/1.0, flip 0.5/0.5, brightness 0.4, contrast 0.4,
    /// saturation 0.2, hue 0.1, grayscale 0.2, blur 1.0/0.1, solarize 0.0/0.2.
    /// Crop area floor is 0.5: on 16×16 inputs a smaller crop leaves a few pixels.
    fn default() -> Self {
        let base = ViewParams {
            crop_prob: 1.0,
            flip_prob: 0.5,
            jitter: JitterStrength {
                brightness: 0.4,
                contrast: 0.4,
                saturation: 0.2,
                hue: 0.1,
            },
            grayscale_prob: 0.2,
            blur_prob: 1.0,
            solarize_prob: 0.0,
        };
        AugmentPolicy {
            view1: base,
            view2: ViewParams {
                blur_prob: 0.1,
                solarize_prob: 0.2,
                ..base
            },
            crop_area: (0.5, 1.0),
            crop_aspect: (3.0 / 4.0, 4.0 / 3.0),
            blur_kernel: None,
            blur_sigma: (0.1, 1.0),
            luma: BT601_LUMA,
        }
    }
}

impl AugmentPolicy {
    /// A policy under which both views reproduce the input exactly.
    pub fn identity() -> Self {
        AugmentPolicy {
            view1: ViewParams::identity(),
            view2: ViewParams::identity(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.view1.validate("view1")?;
        self.view2.validate("view2")?;
        let (lo, hi) = self.crop_area;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return Err(ScgirError::Config(format!("crop area range ({lo}, {hi}) must satisfy 0 < lo <= hi <= 1")));
        }
        let (lo, hi) = self.crop_aspect;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(ScgirError::Config(format!("crop aspect range ({lo}, {hi}) invalid")));
        }
        let (lo, hi) = self.blur_sigma;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(ScgirError::Config(format!("blur sigma range ({lo}, {hi}) must satisfy 0 < lo <= hi")));
        }
        if let Some(k) = self.blur_kernel {
            if k < 3 || k % 2 == 0 {
                return Err(ScgirError::Config(format!("blur kernel size must be odd and >= 3, got {k}")));
            }
        }
        if self.luma.iter().any(|w| *w < 0.0) {
            return Err(ScgirError::Config("luma weights must be nonnegative".into()));
        }
        Ok(())
    }

    /// Applies one view's pipeline to a single image.
    pub fn apply_view(&self, img: &Image, view: &ViewParams, rng: &mut Rng) -> Result<Image> {
        let mut out = img.clone();
        if rng.bernoulli(view.crop_prob) {
            out = random_crop(&out, self.crop_area, self.crop_aspect, rng);
        }
        if rng.bernoulli(view.flip_prob) {
            out = hflip(&out);
        }
        out = color_jitter(&out, view.jitter, self.luma, rng);
        if rng.bernoulli(view.grayscale_prob) {
            out = color_drop(&out, self.luma);
        }
        if rng.bernoulli(view.blur_prob) {
            let k = self.blur_kernel.unwrap_or_else(|| default_blur_kernel(out.h, out.w));
            out = gaussian_blur(&out, k, self.blur_sigma, rng)?;
        }
        if rng.bernoulli(view.solarize_prob) {
            out = solarize(&out);
        }
        Ok(out)
    }

    /// Two distorted views of every image; each image gets its own split stream.
    pub fn two_views(&self, x: &ImageBatch, rng: &mut Rng) -> Result<(ImageBatch, ImageBatch)> {
        self.validate()?;
        if x.h < 4 || x.w < 4 {
            return Err(ScgirError::Data(format!("images must be at least 4x4, got {}x{}", x.h, x.w)));
        }
        let mut a = Vec::with_capacity(x.n);
        let mut b = Vec::with_capacity(x.n);
        for i in 0..x.n {
            let mut local = rng.split();
            let img = x.image(i);
            a.push(self.apply_view(&img, &self.view1, &mut local)?);
            b.push(self.apply_view(&img, &self.view2, &mut local)?);
        }
        Ok((ImageBatch::from_images(&a)?, ImageBatch::from_images(&b)?))
    }
}

/// Free-function form of [`AugmentPolicy::two_views`].
pub fn two_views(x: &ImageBatch, policy: &AugmentPolicy, rng: &mut Rng) -> Result<(ImageBatch, ImageBatch)> {
    policy.two_views(x, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(n: usize, c: usize, seed: u64) -> ImageBatch {
        let mut rng = Rng::seed(seed);
        let data = (0..n * c * 8 * 8).map(|_| rng.uniform()).collect();
        ImageBatch::new(n, c, 8, 8, data).unwrap()
    }

    #[test]
    fn identity_policy_passthrough() {
        let x = batch(4, 3, 1);
        let (a, b) = AugmentPolicy::identity().two_views(&x, &mut Rng::seed(3)).unwrap();
        assert_eq!(a, x);
        assert_eq!(b, x);
    }

    #[test]
    fn default_policy_values() {
        let p = AugmentPolicy::default();
        assert_eq!((p.view1.crop_prob, p.view2.crop_prob), (1.0, 1.0));
        assert_eq!((p.view1.flip_prob, p.view2.flip_prob), (0.5, 0.5));
        assert_eq!(p.view1.jitter.brightness, 0.4);
        assert_eq!(p.view1.jitter.contrast, 0.4);
        assert_eq!(p.view1.jitter.saturation, 0.2);
        assert_eq!(p.view1.jitter.hue, 0.1);
        assert_eq!((p.view1.grayscale_prob, p.view2.grayscale_prob), (0.2, 0.2));
        assert_eq!((p.view1.blur_prob, p.view2.blur_prob), (1.0, 0.1));
        assert_eq!((p.view1.solarize_prob, p.view2.solarize_prob), (0.0, 0.2));
        assert_eq!(p.blur_sigma, (0.1, 1.0));
        assert!(p.validate().is_ok());
    }

    #[test]
    fn seeded_views_are_reproducible() {
        let x = batch(3, 3, 2);
        let p = AugmentPolicy::default();
        let first = p.two_views(&x, &mut Rng::seed(7)).unwrap();
        let second = p.two_views(&x, &mut Rng::seed(7)).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn invalid_policies_rejected() {
        let mut p = AugmentPolicy::default();
        p.view2.flip_prob = 1.5;
        assert!(p.validate().is_err());
        let mut p = AugmentPolicy::default();
        p.blur_sigma = (1.0, 0.1);
        assert!(p.validate().is_err());
        let mut p = AugmentPolicy::default();
        p.blur_kernel = Some(4);
        assert!(p.validate().is_err());
    }

    #[test]
    fn grayscale_batch_survives_default_policy() {
        let x = batch(5, 1, 4);
        let (a, b) = AugmentPolicy::default().two_views(&x, &mut Rng::seed(9)).unwrap();
        assert_eq!((a.n, a.c, a.h, a.w), (5, 1, 8, 8));
        assert!(a.data.iter().chain(&b.data).all(|v| (0.0..=1.0).contains(v)));
    }
}
