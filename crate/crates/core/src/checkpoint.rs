//! Binary checkpoint format.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! "QOCN"            4 bytes magic
//! version           u32 (= 1)
//! architecture      u8  (0 onn, 1 qonn, 2 qocnn, 3 custom)
//! seed              u64
//! layer count       u32
//! per layer:
//!   kind id         u8
//!   in_dim          u32
//!   out_dim         u32
//!   hyperparameters sinusoid: f64 lambda
//!                   quantum_conv: u32 kernel, u32 step
//!                   split_max_pool: u32 window, u32 stride
//!                   others: none
//! parameters, in layer order, for layers with weights:
//!   rows*cols f64 real parts, then rows*cols f64 imaginary parts
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::layers::{Layer, LayerKind, LayerSpec};
use crate::linalg::ComplexMatrix;
use crate::model::{Architecture, ModelGraph};

pub const MAGIC: &[u8; 4] = b"QOCN";
pub const VERSION: u32 = 1;

pub fn encode(model: &ModelGraph) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(model.arch.tag());
    out.extend_from_slice(&model.seed.to_le_bytes());
    out.extend_from_slice(&(model.layers.len() as u32).to_le_bytes());
    let u32le = |out: &mut Vec<u8>, v: usize| out.extend_from_slice(&(v as u32).to_le_bytes());
    for layer in &model.layers {
        let spec = &layer.spec;
        out.push(spec.kind().id());
        u32le(&mut out, spec.in_dim());
        u32le(&mut out, spec.out_dim());
        match *spec {
            LayerSpec::Sinusoid { lambda, .. } => out.extend_from_slice(&lambda.to_le_bytes()),
            LayerSpec::QuantumConv { kernel, step, .. } => {
                u32le(&mut out, kernel);
                u32le(&mut out, step);
            }
            LayerSpec::SplitMaxPool { window, stride, .. } => {
                u32le(&mut out, window);
                u32le(&mut out, stride);
            }
            _ => {}
        }
    }
    for w in model.layers.iter().filter_map(|l| l.weights.as_ref()) {
        for v in w.re.iter().chain(&w.im) {
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
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        let slice = self.bytes.get(self.pos..end).ok_or(Error::Truncated {
            expected: end,
            actual: self.bytes.len(),
        })?;
        self.pos = end;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn usize(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Format("parameter count overflow".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

pub fn decode(bytes: &[u8]) -> Result<ModelGraph> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(Error::Format(format!("bad checkpoint magic {magic:?}")));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Version {
            found: version,
            expected: VERSION,
        });
    }
    let arch = Architecture::from_tag(r.u8()?)?;
    let seed = r.u64()?;
    let count = r.usize()?;
    let mut specs = Vec::with_capacity(count.min(1024));
    for i in 0..count {
        let kind = LayerKind::from_id(r.u8()?)?;
        let in_dim = r.usize()?;
        let out_dim = r.usize()?;
        let spec = match kind {
            LayerKind::ComplexLinear => LayerSpec::ComplexLinear { in_dim, out_dim },
            LayerKind::Sinusoid => LayerSpec::Sinusoid {
                dim: in_dim,
                lambda: r.f64()?,
            },
            LayerKind::ModSoftplus => LayerSpec::ModSoftplus { dim: in_dim },
            LayerKind::ModSquared => LayerSpec::ModSquared { dim: in_dim },
            LayerKind::LogSoftmax => LayerSpec::LogSoftmax { dim: in_dim },
            LayerKind::QuantumConv => LayerSpec::QuantumConv {
                dim: in_dim,
                kernel: r.usize()?,
                step: r.usize()?,
            },
            LayerKind::SplitMaxPool => LayerSpec::SplitMaxPool {
                dim: in_dim,
                window: r.usize()?,
                stride: r.usize()?,
            },
        };
        spec.validate()?;
        if spec.out_dim() != out_dim {
            return Err(Error::Format(format!(
                "layer {i} ({kind}) records output dimension {out_dim}, its parameters imply {}",
                spec.out_dim()
            )));
        }
        specs.push(spec);
    }
    let mut layers = Vec::with_capacity(specs.len());
    for spec in specs {
        let weights = match spec.weight_shape() {
            Some((rows, cols)) => {
                let re = r.f64s(rows * cols)?;
                let im = r.f64s(rows * cols)?;
                Some(ComplexMatrix::from_parts(rows, cols, re, im)?)
            }
            None => None,
        };
        layers.push(Layer::new(spec, weights)?);
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after checkpoint payload",
            bytes.len() - r.pos
        )));
    }
    ModelGraph::from_layers(arch, seed, layers)
}

pub fn save_checkpoint(model: &ModelGraph, path: &Path) -> Result<()> {
    write_atomic(path, &encode(model))
}

pub fn load_checkpoint(path: &Path) -> Result<ModelGraph> {
    decode(&fs::read(path)?)
}
