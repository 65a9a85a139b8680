//! Closed-form operation, parameter and qubit counts comparing classical and
//! swap-test based layer evaluation. Constant factors are one throughout, so
//! these are order-of-magnitude estimates, not hardware predictions.

use std::io::Write;

use crate::data::FOLDED_LEN;
use crate::error::{Error, Result};

/// `L` layers of width `n` evaluated on batches of `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WorkloadSpec {
    pub layers: u64,
    pub n: u64,
    pub batch: u64,
}

impl WorkloadSpec {
    pub fn new(layers: u64, n: u64, batch: u64) -> Result<Self> {
        if layers == 0 || n == 0 || batch == 0 {
            return Err(Error::InvalidArgument(format!(
                "workload parameters must be positive (L={layers}, n={n}, b={batch})"
            )));
        }
        Ok(Self { layers, n, batch })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResourceReport {
    pub workload: WorkloadSpec,
    pub classical_ops: u128,
    pub quantum_ops: u128,
    pub speedup: f64,
    pub classical_params: u128,
    pub qubit_estimate: u128,
}

/// `b * n^2 * L`.
pub fn classical_ops(w: WorkloadSpec) -> u128 {
    let (l, n, b) = widen(w);
    b * n * n * l
}

/// `n * (n + b) * L`.
pub fn quantum_ops(w: WorkloadSpec) -> u128 {
    let (l, n, b) = widen(w);
    n * (n + b) * l
}

/// `n^2 * L`.
pub fn classical_params(w: WorkloadSpec) -> u128 {
    let (l, n, _) = widen(w);
    n * n * l
}

/// `L * (ceil(log2 n) + ceil(log2 b))`.
pub fn qubit_estimate(w: WorkloadSpec) -> u128 {
    let (l, _, _) = widen(w);
    l * u128::from(ceil_log2(w.n) + ceil_log2(w.batch))
}

/// Single-photon modes needed for one folded MNIST image.
pub fn input_qubits_mnist() -> u64 {
    FOLDED_LEN as u64
}

/// `classical_ops / quantum_ops`, which simplifies to `b n / (n + b)`.
pub fn speedup(w: WorkloadSpec) -> f64 {
    classical_ops(w) as f64 / quantum_ops(w) as f64
}

pub fn estimate(w: WorkloadSpec) -> ResourceReport {
    ResourceReport {
        workload: w,
        classical_ops: classical_ops(w),
        quantum_ops: quantum_ops(w),
        speedup: speedup(w),
        classical_params: classical_params(w),
        qubit_estimate: qubit_estimate(w),
    }
}

/// Smallest `k` with `2^k >= x`; 0 for `x = 1`.
pub fn ceil_log2(x: u64) -> u32 {
    assert!(x > 0, "ceil_log2 of zero");
    if x == 1 {
        0
    } else {
        u64::BITS - (x - 1).leading_zeros()
    }
}

fn widen(w: WorkloadSpec) -> (u128, u128, u128) {
    (u128::from(w.layers), u128::from(w.n), u128::from(w.batch))
}

pub const CSV_HEADER: [&str; 8] = [
    "L",
    "n",
    "b",
    "classical_ops",
    "quantum_ops",
    "speedup",
    "classical_params",
    "qubit_estimate",
];

pub fn write_csv<W: Write>(reports: &[ResourceReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in reports {
        w.write_record([
            r.workload.layers.to_string(),
            r.workload.n.to_string(),
            r.workload.batch.to_string(),
            r.classical_ops.to_string(),
            r.quantum_ops.to_string(),
            r.speedup.to_string(),
            r.classical_params.to_string(),
            r.qubit_estimate.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
