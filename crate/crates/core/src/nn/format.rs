//! `DDAW` weights encoding.
//!
//! ```text
//! magic      b"DDAW"
//! version    u32
//! num_layers u32, base_channels u32, kernel_size u32
//! residual   u8 (0 | 1)
//! precision  u8 (bytes per sample, always 8)
//! per layer: c_out u32, c_in u32, kernel_size u32,
//!            kernel [c_out*c_in*k*k] f64, bias [c_out] f64
//! ```
//!
//! Every integer and float is little-endian.

use alloc::vec::Vec;

use super::{ConvLayer, SupernetSpec, SupernetWeights};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"DDAW";
pub const FORMAT_VERSION: u32 = 1;
const PRECISION_BYTES: u8 = 8;

pub fn encode_weights(weights: &SupernetWeights) -> Vec<u8> {
    let spec = weights.spec();
    let mut out = Vec::with_capacity(24 + weights.param_count() * 8 + weights.layers().len() * 12);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for v in [spec.num_layers(), spec.base_channels(), spec.kernel_size()] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.push(spec.residual() as u8);
    out.push(PRECISION_BYTES);
    for layer in weights.layers() {
        for v in [layer.c_out, layer.c_in, layer.kernel_size] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for x in layer.kernel.iter().chain(&layer.bias) {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(Error::Truncated);
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or(Error::Truncated)?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn decode_weights(bytes: &[u8]) -> Result<SupernetWeights> {
    let mut r = Reader { bytes };
    if r.take(4).map_err(|_| Error::BadMagic)? != MAGIC {
        return Err(Error::BadMagic);
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let num_layers = r.u32()? as usize;
    let base_channels = r.u32()? as usize;
    let kernel_size = r.u32()? as usize;
    let residual = match r.u8()? {
        0 => false,
        1 => true,
        _ => return Err(Error::Spec("residual flag must be 0 or 1")),
    };
    let precision = r.u8()?;
    if precision != PRECISION_BYTES {
        return Err(Error::UnsupportedPrecision(precision));
    }
    let spec = SupernetSpec::new(num_layers, base_channels, kernel_size, residual)?;

    let mut layers = Vec::with_capacity(num_layers);
    for (layer, (c_in, c_out)) in spec.channels_at(1.0).into_iter().enumerate() {
        let shape = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
        if shape != (c_out, c_in, kernel_size) {
            return Err(Error::LayerShape { layer });
        }
        let kernel = r.f64s(c_out * c_in * kernel_size * kernel_size)?;
        let bias = r.f64s(c_out)?;
        layers.push(ConvLayer {
            c_out,
            c_in,
            kernel_size,
            kernel,
            bias,
        });
    }
    if !r.bytes.is_empty() {
        return Err(Error::TrailingBytes(r.bytes.len()));
    }
    Ok(SupernetWeights::from_layers(spec, layers))
}
