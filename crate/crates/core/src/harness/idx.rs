//! MNIST-style IDX containers: big-endian magic, dimension sizes, unsigned bytes.

use std::path::Path;

use crate::augment::ImageBatch;
use crate::error::{Result, ScgirError};

use super::labels::LabelBatch;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| ScgirError::Format {
            offset,
            msg: "truncated header".into(),
        })
}

/// Returns the dimension sizes and the payload of an unsigned-byte IDX file.
fn parse(bytes: &[u8], magic: u32) -> Result<(Vec<usize>, &[u8])> {
    let got = read_u32(bytes, 0)?;
    if got != magic {
        return Err(ScgirError::Format {
            offset: 0,
            msg: format!("magic 0x{got:08x}, expected 0x{magic:08x}"),
        });
    }
    let rank = (magic & 0xff) as usize;
    let dims = (0..rank)
        .map(|i| read_u32(bytes, 4 + 4 * i).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let start = 4 + 4 * rank;
    let len = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).ok_or(ScgirError::Format {
        offset: 4,
        msg: "dimension product overflows".into(),
    })?;
    let payload = &bytes[start..];
    if payload.len() < len {
        return Err(ScgirError::Format {
            offset: bytes.len(),
            msg: format!("payload has {} bytes, header promises {len}", payload.len()),
        });
    }
    if payload.len() > len {
        return Err(ScgirError::Format {
            offset: start + len,
            msg: format!("{} trailing bytes", payload.len() - len),
        });
    }
    Ok((dims, payload))
}

/// Grayscale images scaled to `[0, 1]` by `/255`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<ImageBatch> {
    let (dims, payload) = parse(bytes, IMAGES_MAGIC)?;
    let (n, h, w) = (dims[0], dims[1], dims[2]);
    ImageBatch::new(n, 1, h, w, payload.iter().map(|&b| f64::from(b) / 255.0).collect())
}

/// Labels; the class count is one more than the largest label.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<LabelBatch> {
    let (_, payload) = parse(bytes, LABELS_MAGIC)?;
    let labels: Vec<usize> = payload.iter().map(|&b| usize::from(b)).collect();
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    LabelBatch::new(labels, classes)
}

pub fn load_idx(images: &Path, labels: &Path) -> Result<(ImageBatch, LabelBatch)> {
    let imgs = parse_idx_images(&std::fs::read(images)?)?;
    let labs = parse_idx_labels(&std::fs::read(labels)?)?;
    if imgs.n != labs.len() {
        return Err(ScgirError::Data(format!(
            "{} images but {} labels",
            imgs.n,
            labs.len()
        )));
    }
    Ok((imgs, labs))
}

/// Serializes single-channel images, rounding pixels to the nearest byte.
pub fn write_idx_images(images: &ImageBatch) -> Result<Vec<u8>> {
    if images.c != 1 {
        return Err(ScgirError::Unsupported("IDX images must be single-channel".into()));
    }
    let mut out = Vec::with_capacity(16 + images.data.len());
    out.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    for d in [images.n, images.h, images.w] {
        out.extend_from_slice(&dim_u32(d)?.to_be_bytes());
    }
    out.extend(images.data.iter().map(|&v| (v * 255.0).round() as u8));
    Ok(out)
}

pub fn write_idx_labels(labels: &LabelBatch) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&dim_u32(labels.len())?.to_be_bytes());
    for &l in &labels.labels {
        out.push(u8::try_from(l).map_err(|_| ScgirError::Unsupported(format!("label {l} does not fit a byte")))?);
    }
    Ok(out)
}

fn dim_u32(d: usize) -> Result<u32> {
    u32::try_from(d).map_err(|_| ScgirError::Unsupported(format!("dimension {d} exceeds u32")))
}
