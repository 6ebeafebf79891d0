use crate::error::{Result, ScgirError};
use crate::numeric::Tensor;

/// Single `c × h × w` image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(c: usize, h: usize, w: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != c * h * w {
            return Err(ScgirError::shape("image", &[c, h, w], &[data.len()]));
        }
        Ok(Image { c, h, w, data })
    }

    pub fn filled(c: usize, h: usize, w: usize, value: f64) -> Self {
        Image {
            c,
            h,
            w,
            data: vec![value; c * h * w],
        }
    }

    #[inline]
    pub fn at(&self, ch: usize, y: usize, x: usize) -> f64 {
        self.data[(ch * self.h + y) * self.w + x]
    }

    #[inline]
    pub fn set(&mut self, ch: usize, y: usize, x: usize, v: f64) {
        self.data[(ch * self.h + y) * self.w + x] = v;
    }

    pub fn plane(&self, ch: usize) -> &[f64] {
        &self.data[ch * self.h * self.w..(ch + 1) * self.h * self.w]
    }

    pub fn clamp_unit(&mut self) {
        self.data.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    }

    pub fn in_unit_range(&self) -> bool {
        self.data.iter().all(|v| (0.0..=1.0).contains(v))
    }

    /// Anisotropic total variation summed over channels.
    pub fn total_variation(&self) -> f64 {
        let mut tv = 0.0;
        for ch in 0..self.c {
            for y in 0..self.h {
                for x in 0..self.w {
                    if x + 1 < self.w {
                        tv += (self.at(ch, y, x + 1) - self.at(ch, y, x)).abs();
                    }
                    if y + 1 < self.h {
                        tv += (self.at(ch, y + 1, x) - self.at(ch, y, x)).abs();
                    }
                }
            }
        }
        tv
    }
}

/// Batch of `n` images sharing one shape, stored `[n, c, h, w]` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBatch {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl ImageBatch {
    pub fn new(n: usize, c: usize, h: usize, w: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * c * h * w {
            return Err(ScgirError::shape("image batch", &[n, c, h, w], &[data.len()]));
        }
        if c != 1 && c != 3 {
            return Err(ScgirError::Data(format!("images must have 1 or 3 channels, got {c}")));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(ScgirError::Data(format!("pixel value {bad} outside [0, 1]")));
        }
        Ok(ImageBatch { n, c, h, w, data })
    }

    pub fn from_images(images: &[Image]) -> Result<Self> {
        let first = images
            .first()
            .ok_or_else(|| ScgirError::Data("empty image list".into()))?;
        let (c, h, w) = (first.c, first.h, first.w);
        let mut data = Vec::with_capacity(images.len() * c * h * w);
        for img in images {
            if (img.c, img.h, img.w) != (c, h, w) {
                return Err(ScgirError::shape("image batch", &[c, h, w], &[img.c, img.h, img.w]));
            }
            data.extend_from_slice(&img.data);
        }
        ImageBatch::new(images.len(), c, h, w, data)
    }

    pub fn image_len(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn image(&self, i: usize) -> Image {
        let len = self.image_len();
        Image {
            c: self.c,
            h: self.h,
            w: self.w,
            data: self.data[i * len..(i + 1) * len].to_vec(),
        }
    }

    pub fn gather(&self, indices: &[usize]) -> ImageBatch {
        let len = self.image_len();
        let mut data = Vec::with_capacity(indices.len() * len);
        for &i in indices {
            data.extend_from_slice(&self.data[i * len..(i + 1) * len]);
        }
        ImageBatch {
            n: indices.len(),
            c: self.c,
            h: self.h,
            w: self.w,
            data,
        }
    }

    /// `[n, c, h, w]` tensor view of the pixels.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(vec![self.n, self.c, self.h, self.w], self.data.clone()).expect("batch invariant")
    }
}
