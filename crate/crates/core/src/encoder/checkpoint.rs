//! Flat binary checkpoints: `SCGIR1` magic, 32-byte config digest, tensor
//! count, then every tensor in declaration order as rank, dims and
//! little-endian `f64` values.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Result, ScgirError};
use crate::numeric::{ParamStore, Tensor};

pub const MAGIC: &[u8; 6] = b"SCGIR1";

pub fn encode_checkpoint(store: &ParamStore, digest: &[u8; 32]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(digest);
    out.extend_from_slice(&(store.len() as u32).to_le_bytes());
    for e in store.entries() {
        let shape = e.value.shape();
        out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for &d in shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in e.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn save_checkpoint(path: &Path, store: &ParamStore, digest: &[u8; 32]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode_checkpoint(store, digest))?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(ScgirError::Format {
                offset: self.pos,
                msg: format!("checkpoint truncated: wanted {n} bytes"),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Decodes a checkpoint into a copy of `template`, which fixes names and shapes.
pub fn decode_checkpoint(bytes: &[u8], expected_digest: &[u8; 32], template: &ParamStore) -> Result<ParamStore> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(6)? != MAGIC {
        return Err(ScgirError::Format {
            offset: 0,
            msg: "bad checkpoint magic".into(),
        });
    }
    if r.take(32)? != expected_digest {
        return Err(ScgirError::Data("checkpoint config digest does not match the model config".into()));
    }
    let count = r.u32()? as usize;
    if count != template.len() {
        return Err(ScgirError::Data(format!(
            "checkpoint holds {count} tensors, model expects {}",
            template.len()
        )));
    }
    let mut store = template.clone();
    for e in store.entries_mut() {
        let offset = r.pos;
        let rank = r.u32()? as usize;
        let shape = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        if shape != e.value.shape() {
            return Err(ScgirError::Format {
                offset,
                msg: format!("tensor {} has shape {shape:?}, expected {:?}", e.name, e.value.shape()),
            });
        }
        let n: usize = shape.iter().product();
        let raw = r.take(n * 8)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        e.value = Tensor::new(shape, data)?;
    }
    if r.pos != bytes.len() {
        return Err(ScgirError::Format {
            offset: r.pos,
            msg: "trailing bytes after checkpoint".into(),
        });
    }
    Ok(store)
}

pub fn load_checkpoint(path: &Path, expected_digest: &[u8; 32], template: &ParamStore) -> Result<ParamStore> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_checkpoint(&bytes, expected_digest, template)
}
