use super::image::Image;
use crate::error::{Result, ScgirError};
use crate::numeric::Rng;

/// BT.601 luma weights.
pub const BT601_LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// `x` below one half is kept, otherwise mapped to `1 - x`.
#[inline]
pub fn solarize_value(x: f64) -> f64 {
    if x < 0.5 {
        x
    } else {
        1.0 - x
    }
}

pub fn solarize(img: &Image) -> Image {
    let mut out = img.clone();
    out.data.iter_mut().for_each(|v| *v = solarize_value(*v));
    out
}

pub fn hflip(img: &Image) -> Image {
    let mut out = img.clone();
    for ch in 0..img.c {
        for y in 0..img.h {
            for x in 0..img.w {
                out.set(ch, y, x, img.at(ch, y, img.w - 1 - x));
            }
        }
    }
    out
}

/// Luma of every pixel (for 1-channel images, the channel itself).
fn luma_plane(img: &Image, luma: [f64; 3]) -> Vec<f64> {
    if img.c != 3 {
        return img.plane(0).to_vec();
    }
    let (r, g, b) = (img.plane(0), img.plane(1), img.plane(2));
    (0..img.h * img.w)
        .map(|i| luma[0] * r[i] + luma[1] * g[i] + luma[2] * b[i])
        .collect()
}

/// Replaces every channel by the weighted luma. 1-channel images pass through.
pub fn color_drop(img: &Image, luma: [f64; 3]) -> Image {
    if img.c != 3 {
        return img.clone();
    }
    let gray = luma_plane(img, luma);
    let mut out = img.clone();
    for ch in 0..3 {
        out.data[ch * img.h * img.w..(ch + 1) * img.h * img.w].copy_from_slice(&gray);
    }
    out.clamp_unit();
    out
}

pub fn adjust_brightness(img: &Image, factor: f64) -> Image {
    let mut out = img.clone();
    out.data.iter_mut().for_each(|v| *v *= factor);
    out.clamp_unit();
    out
}

/// Blends each pixel with the image's mean luma.
pub fn adjust_contrast(img: &Image, factor: f64, luma: [f64; 3]) -> Image {
    let gray = luma_plane(img, luma);
    let mean = gray.iter().sum::<f64>() / gray.len() as f64;
    let mut out = img.clone();
    out.data.iter_mut().for_each(|v| *v = (*v - mean) * factor + mean);
    out.clamp_unit();
    out
}

/// Blends each pixel with its own luma; factor 0 gives grayscale.
pub fn adjust_saturation(img: &Image, factor: f64, luma: [f64; 3]) -> Image {
    if img.c != 3 {
        return img.clone();
    }
    let gray = luma_plane(img, luma);
    let mut out = img.clone();
    let hw = img.h * img.w;
    for (i, v) in out.data.iter_mut().enumerate() {
        let g = gray[i % hw];
        *v = g + factor * (*v - g);
    }
    out.clamp_unit();
    out
}

fn rgb_to_hsv(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        ((g - b) / delta).rem_euclid(6.0) / 6.0
    } else if max == g {
        ((b - r) / delta + 2.0) / 6.0
    } else {
        ((r - g) / delta + 4.0) / 6.0
    };
    let s = if max == 0.0 { 0.0 } else { delta / max };
    (h, s, max)
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> (f64, f64, f64) {
    let h6 = h.rem_euclid(1.0) * 6.0;
    let sector = h6.floor();
    let f = h6 - sector;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match sector as i32 {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    }
}

/// Rotates hue by `offset` turns of the hue circle (offset 0.1 = 36°).
pub fn adjust_hue(img: &Image, offset: f64) -> Image {
    if img.c != 3 || offset == 0.0 {
        return img.clone();
    }
    let hw = img.h * img.w;
    let mut out = img.clone();
    for i in 0..hw {
        let (h, s, v) = rgb_to_hsv(img.data[i], img.data[hw + i], img.data[2 * hw + i]);
        let (r, g, b) = hsv_to_rgb(h + offset, s, v);
        out.data[i] = r;
        out.data[hw + i] = g;
        out.data[2 * hw + i] = b;
    }
    out.clamp_unit();
    out
}

/// Jitter intensities; each factor is drawn from `[1 - max, 1 + max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterStrength {
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
    pub hue: f64,
}

/// Brightness, contrast, saturation and hue adjustments in a random order.
/// Saturation and hue only act on 3-channel images.
pub fn color_jitter(img: &Image, strength: JitterStrength, luma: [f64; 3], rng: &mut Rng) -> Image {
    let mut order = [0usize, 1, 2, 3];
    rng.shuffle(&mut order);
    let mut out = img.clone();
    let factor = |max: f64, rng: &mut Rng| rng.uniform_range((1.0 - max).max(0.0), 1.0 + max);
    for op in order {
        out = match op {
            0 if strength.brightness > 0.0 => adjust_brightness(&out, factor(strength.brightness, rng)),
            1 if strength.contrast > 0.0 => adjust_contrast(&out, factor(strength.contrast, rng), luma),
            2 if strength.saturation > 0.0 && img.c == 3 => {
                adjust_saturation(&out, factor(strength.saturation, rng), luma)
            }
            3 if strength.hue > 0.0 && img.c == 3 => {
                adjust_hue(&out, rng.uniform_range(-strength.hue, strength.hue))
            }
            _ => out,
        };
    }
    out
}

/// Symmetric (edge-including) reflection of `i` into `0..n`.
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

/// Normalized 1-D Gaussian taps of odd length `size`.
pub fn gaussian_kernel(size: usize, sigma: f64) -> Result<Vec<f64>> {
    if size < 3 || size % 2 == 0 {
        return Err(ScgirError::Config(format!("blur kernel size must be odd and >= 3, got {size}")));
    }
    if !(sigma > 0.0) {
        return Err(ScgirError::Config(format!("blur sigma must be positive, got {sigma}")));
    }
    let r = (size / 2) as isize;
    let taps: Vec<f64> = (-r..=r).map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = taps.iter().sum();
    Ok(taps.into_iter().map(|t| t / total).collect())
}

/// Separable Gaussian blur with a fixed `sigma` and reflected borders.
pub fn gaussian_blur_fixed(img: &Image, size: usize, sigma: f64) -> Result<Image> {
    let taps = gaussian_kernel(size, sigma)?;
    let r = (size / 2) as isize;
    let (h, w) = (img.h, img.w);
    let mut tmp = img.clone();
    for ch in 0..img.c {
        for y in 0..h {
            for x in 0..w {
                let acc = taps
                    .iter()
                    .enumerate()
                    .map(|(t, k)| k * img.at(ch, y, reflect(x as isize + t as isize - r, w)))
                    .sum();
                tmp.set(ch, y, x, acc);
            }
        }
    }
    let mut out = tmp.clone();
    for ch in 0..img.c {
        for y in 0..h {
            for x in 0..w {
                let acc = taps
                    .iter()
                    .enumerate()
                    .map(|(t, k)| k * tmp.at(ch, reflect(y as isize + t as isize - r, h), x))
                    .sum();
                out.set(ch, y, x, acc);
            }
        }
    }
    out.clamp_unit();
    Ok(out)
}

/// Gaussian blur with `sigma ~ U(sigma_range)`.
pub fn gaussian_blur(img: &Image, size: usize, sigma_range: (f64, f64), rng: &mut Rng) -> Result<Image> {
    let sigma = rng.uniform_range(sigma_range.0, sigma_range.1);
    gaussian_blur_fixed(img, size, sigma)
}

/// Default kernel size: largest odd integer `<= max(3, round(0.1 * min(h, w)))`.
pub fn default_blur_kernel(h: usize, w: usize) -> usize {
    let target = ((0.1 * h.min(w) as f64).round() as usize).max(3);
    if target % 2 == 1 {
        target
    } else {
        target - 1
    }
}

/// Pixel-aligned crop box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropBox {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

/// Samples a box whose area fraction is uniform in `area` and whose aspect
/// ratio (w/h) is log-uniform in `aspect`. Falls back to the full image after
/// ten rejected draws.
pub fn sample_crop_box(h: usize, w: usize, area: (f64, f64), aspect: (f64, f64), rng: &mut Rng) -> CropBox {
    let total = (h * w) as f64;
    let (log_lo, log_hi) = (aspect.0.ln(), aspect.1.ln());
    for _ in 0..10 {
        let target = total * rng.uniform_range(area.0, area.1);
        let ratio = rng.uniform_range(log_lo, log_hi).exp();
        let bw = (target * ratio).sqrt().round() as usize;
        let bh = (target / ratio).sqrt().round() as usize;
        if bw > 0 && bh > 0 && bw <= w && bh <= h {
            let top = rng.below(h - bh + 1);
            let left = rng.below(w - bw + 1);
            return CropBox {
                top,
                left,
                height: bh,
                width: bw,
            };
        }
    }
    CropBox {
        top: 0,
        left: 0,
        height: h,
        width: w,
    }
}

const CUBIC_A: f64 = -0.5;

/// Keys cubic convolution kernel.
pub fn cubic_weight(t: f64) -> f64 {
    let t = t.abs();
    if t <= 1.0 {
        ((CUBIC_A + 2.0) * t - (CUBIC_A + 3.0)) * t * t + 1.0
    } else if t < 2.0 {
        ((CUBIC_A * t - 5.0 * CUBIC_A) * t + 8.0 * CUBIC_A) * t - 4.0 * CUBIC_A
    } else {
        0.0
    }
}

/// Source taps (indices within `0..len`) and weights for resampling `len`
/// pixels to `out_len` with pixel-centre alignment.
fn resample_taps(len: usize, out_len: usize) -> Vec<[(usize, f64); 4]> {
    let scale = len as f64 / out_len as f64;
    (0..out_len)
        .map(|o| {
            let src = (o as f64 + 0.5) * scale - 0.5;
            let base = src.floor() as isize;
            let mut taps = [(0usize, 0.0); 4];
            for (k, tap) in taps.iter_mut().enumerate() {
                let idx = base - 1 + k as isize;
                *tap = (idx.clamp(0, len as isize - 1) as usize, cubic_weight(src - idx as f64));
            }
            taps
        })
        .collect()
}

/// Crops `b` out of `img` and resizes it back to `img`'s size with bicubic
/// interpolation, replicating the box edges. Output clamped to `[0, 1]`.
pub fn crop_resize(img: &Image, b: CropBox) -> Image {
    let (h, w) = (img.h, img.w);
    let xt = resample_taps(b.width, w);
    let yt = resample_taps(b.height, h);
    let mut rows = vec![0.0; img.c * b.height * w];
    for ch in 0..img.c {
        for by in 0..b.height {
            for (x, taps) in xt.iter().enumerate() {
                rows[(ch * b.height + by) * w + x] = taps
                    .iter()
                    .map(|&(sx, wt)| wt * img.at(ch, b.top + by, b.left + sx))
                    .sum();
            }
        }
    }
    let mut out = Image::filled(img.c, h, w, 0.0);
    for ch in 0..img.c {
        for (y, taps) in yt.iter().enumerate() {
            for x in 0..w {
                let v: f64 = taps.iter().map(|&(sy, wt)| wt * rows[(ch * b.height + sy) * w + x]).sum();
                out.set(ch, y, x, v);
            }
        }
    }
    out.clamp_unit();
    out
}

pub fn random_crop(img: &Image, area: (f64, f64), aspect: (f64, f64), rng: &mut Rng) -> Image {
    let b = sample_crop_box(img.h, img.w, area, aspect, rng);
    crop_resize(img, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_image(c: usize, h: usize, w: usize, seed: u64) -> Image {
        let mut rng = Rng::seed(seed);
        Image::new(c, h, w, (0..c * h * w).map(|_| rng.uniform()).collect()).unwrap()
    }

    #[test]
    fn solarize_points() {
        assert_eq!(solarize_value(0.3), 0.3);
        assert_eq!(solarize_value(0.7), 1.0 - 0.7);
        assert_eq!(solarize_value(0.5), 0.5);
    }

    #[test]
    fn color_drop_hand_cases() {
        let white = Image::filled(3, 1, 1, 1.0);
        let out = color_drop(&white, BT601_LUMA);
        assert!(out.data.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        let red = Image::new(3, 1, 1, vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(color_drop(&red, BT601_LUMA).data, vec![0.299; 3]);
    }

    #[test]
    fn color_drop_channels_equal() {
        let img = random_image(3, 5, 7, 1);
        let out = color_drop(&img, BT601_LUMA);
        assert_eq!(out.plane(0), out.plane(1));
        assert_eq!(out.plane(1), out.plane(2));
    }

    #[test]
    fn brightness_factor_two() {
        let img = Image::filled(1, 2, 2, 0.25);
        assert_eq!(adjust_brightness(&img, 2.0).data, vec![0.5; 4]);
    }

    #[test]
    fn jitter_zero_strength_is_identity() {
        let img = random_image(3, 6, 6, 2);
        let zero = JitterStrength {
            brightness: 0.0,
            contrast: 0.0,
            saturation: 0.0,
            hue: 0.0,
        };
        assert_eq!(color_jitter(&img, zero, BT601_LUMA, &mut Rng::seed(0)), img);
    }

    #[test]
    fn zero_saturation_equals_color_drop() {
        let img = random_image(3, 6, 6, 3);
        let sat = adjust_saturation(&img, 0.0, BT601_LUMA);
        let drop = color_drop(&img, BT601_LUMA);
        for (a, b) in sat.data.iter().zip(&drop.data) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn hue_roundtrip_and_full_turn() {
        let img = random_image(3, 4, 4, 4);
        let back = adjust_hue(&adjust_hue(&img, 0.1), -0.1);
        for (a, b) in back.data.iter().zip(&img.data) {
            assert!((a - b).abs() < 1e-12);
        }
        let turned = adjust_hue(&img, 1.0);
        for (a, b) in turned.data.iter().zip(&img.data) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn hsv_primaries() {
        let (r, g, b) = hsv_to_rgb(1.0 / 3.0, 1.0, 1.0);
        assert!((r - 0.0).abs() < 1e-12 && (g - 1.0).abs() < 1e-12 && b.abs() < 1e-12);
        let (h, s, v) = rgb_to_hsv(0.0, 0.0, 1.0);
        assert!((h - 2.0 / 3.0).abs() < 1e-12 && s == 1.0 && v == 1.0);
    }

    #[test]
    fn blur_even_kernel_rejected() {
        let img = Image::filled(1, 4, 4, 0.5);
        assert!(matches!(gaussian_blur_fixed(&img, 4, 1.0), Err(ScgirError::Config(_))));
    }

    #[test]
    fn blur_preserves_constant() {
        let img = Image::filled(3, 6, 5, 0.42);
        let out = gaussian_blur_fixed(&img, 3, 0.8).unwrap();
        assert!(out.data.iter().all(|v| (v - 0.42).abs() < 1e-15));
    }

    #[test]
    fn blur_impulse_matches_direct_kernel() {
        let mut img = Image::filled(1, 7, 7, 0.0);
        img.set(0, 3, 3, 1.0);
        let sigma = 0.1;
        let out = gaussian_blur_fixed(&img, 3, sigma).unwrap();
        // direct evaluation of the normalized 2-D kernel
        let g = |d: f64| (-d * d / (2.0 * sigma * sigma)).exp();
        let norm = (g(-1.0) + g(0.0) + g(1.0)).powi(2);
        for dy in -1i32..=1 {
            for dx in -1i32..=1 {
                let expected = g(dy as f64) * g(dx as f64) / norm;
                let got = out.at(0, (3 + dy) as usize, (3 + dx) as usize);
                assert!((got - expected).abs() < 1e-15, "{dy},{dx}: {got} vs {expected}");
            }
        }
    }

    #[test]
    fn blur_kernel_defaults() {
        assert_eq!(default_blur_kernel(16, 16), 3);
        assert_eq!(default_blur_kernel(32, 32), 3);
        assert_eq!(default_blur_kernel(64, 64), 5);
        assert_eq!(default_blur_kernel(96, 96), 9);
    }

    #[test]
    fn reflect_indices() {
        assert_eq!(reflect(-1, 4), 0);
        assert_eq!(reflect(-2, 4), 1);
        assert_eq!(reflect(4, 4), 3);
        assert_eq!(reflect(5, 4), 2);
    }

    #[test]
    fn full_crop_is_identity() {
        let img = random_image(3, 8, 8, 5);
        let out = random_crop(&img, (1.0, 1.0), (1.0, 1.0), &mut Rng::seed(1));
        for (a, b) in out.data.iter().zip(&img.data) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn crop_preserves_constant() {
        let img = Image::filled(1, 9, 11, 0.37);
        let mut rng = Rng::seed(8);
        for _ in 0..20 {
            let out = random_crop(&img, (0.08, 1.0), (0.75, 4.0 / 3.0), &mut rng);
            assert!(out.data.iter().all(|v| (v - 0.37).abs() < 1e-12));
        }
    }

    #[test]
    fn crop_box_within_bounds() {
        let mut rng = Rng::seed(12);
        for _ in 0..500 {
            let b = sample_crop_box(10, 13, (0.08, 1.0), (0.75, 4.0 / 3.0), &mut rng);
            assert!(b.height >= 1 && b.width >= 1);
            assert!(b.top + b.height <= 10 && b.left + b.width <= 13);
        }
    }

    #[test]
    fn cubic_weights_partition_unity() {
        for &f in &[0.0, 0.1, 0.5, 0.77] {
            let s: f64 = (-1..=2).map(|k| cubic_weight(f - k as f64)).sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
    }
}
