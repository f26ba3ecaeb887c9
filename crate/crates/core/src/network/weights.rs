//! DEPF weight files.
//!
//! Little-endian throughout: magic `DEPF`, version `u32` (1), layer count
//! `u32`; per layer the name length `u32` and UTF-8 name bytes, `out`, `in`,
//! `kh`, `kw` as `u32`, an activation byte (0 none, 1 relu), `out*in*kh*kw`
//! `f32` weights in `(out, in, kh, kw)` order and `out` `f32` biases.

use std::fs;
use std::path::Path;

use crate::depool::KernelBank;
use crate::error::{Error, Result};
use crate::network::conv::{Activation, ConvLayer};
use crate::network::model::Model;

pub const MAGIC: &[u8; 4] = b"DEPF";
pub const VERSION: u32 = 1;

pub fn encode_weights(model: &Model) -> Vec<u8> {
    let layers: Vec<&ConvLayer> = model.layers().collect();
    encode_layers(&layers)
}

/// Serializes any layer list, whether or not it matches the architecture.
pub fn encode_layers(layers: &[&ConvLayer]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(layers.len() as u32).to_le_bytes());
    for l in layers.iter() {
        out.extend_from_slice(&(l.name.len() as u32).to_le_bytes());
        out.extend_from_slice(l.name.as_bytes());
        for d in [l.out_channels, l.in_channels, l.kernel_size, l.kernel_size] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.push(l.activation.tag());
        for v in l.weights.iter().chain(&l.bias) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Weights(format!(
                "truncated at byte {} while reading {what} ({n} bytes needed, {} left)",
                self.pos,
                self.bytes.len() - self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| Error::Weights(format!("{what}: size overflow")))?, what)?;
        Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect())
    }
}

/// Parses a DEPF image and validates it against the architecture table.
pub fn decode_weights(bytes: &[u8]) -> Result<Model> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::Weights(format!("bad magic {:?}, expected \"DEPF\"", String::from_utf8_lossy(magic))));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::Weights(format!("unsupported version {version}")));
    }
    let count = r.u32("layer count")? as usize;
    let mut layers = Vec::with_capacity(count.min(64));
    for i in 0..count {
        let len = r.u32("name length")? as usize;
        let name =
            String::from_utf8(r.take(len, "layer name")?.to_vec()).map_err(|_| Error::Weights(format!("layer {i}: name is not UTF-8")))?;
        let out = r.u32(&format!("{name} out_channels"))? as usize;
        let inp = r.u32(&format!("{name} in_channels"))? as usize;
        let kh = r.u32(&format!("{name} kernel_h"))? as usize;
        let kw = r.u32(&format!("{name} kernel_w"))? as usize;
        if kh != kw {
            return Err(Error::Weights(format!("{name}: non-square kernel {kh}x{kw}")));
        }
        let tag = r.take(1, &format!("{name} activation"))?[0];
        let activation = Activation::from_tag(tag).ok_or_else(|| Error::Weights(format!("{name}: unknown activation tag {tag}")))?;
        let n = out
            .checked_mul(inp)
            .and_then(|v| v.checked_mul(kh * kw))
            .ok_or_else(|| Error::Weights(format!("{name}: weight count overflows")))?;
        let weights = r.f32s(n, &format!("{name} weights"))?;
        let bias = r.f32s(out, &format!("{name} bias"))?;
        let layer = ConvLayer::new(name.clone(), inp, out, kh, weights, bias, activation).map_err(|e| Error::Weights(e.to_string()))?;
        layers.push(layer);
    }
    if r.pos != bytes.len() {
        return Err(Error::Weights(format!("{} trailing bytes after the last layer", bytes.len() - r.pos)));
    }
    Model::from_layers(layers, KernelBank::depool4())
}

pub fn save_weights(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_weights(model)).map_err(|e| Error::io(path, e))
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_weights(&bytes)
}
