//! Translationally invariant convolution built from a product of block
//! matrices.
//!
//! A `k x k` complex kernel with step `s` over an input of length `D` uses
//! `n = ceil(k / s)` matrices. `M_1` carries copies of the kernel along its
//! diagonal every `n * s` indices (a gap of `s0 = n * s - k` between copies),
//! the last copy clipped at `D`. Each later `M_i` is `M_{i-1}` shifted by `s`
//! along both axes, dropping whatever falls past `D`. The convolution is
//! `M_f = M_1 * M_2 * ... * M_n`, applied as `x * M_f`.
//!
//! The matrices are never materialized on the hot path: each `M_i` is block
//! sparse and is applied block by block. Dense forms are available for
//! inspection and testing.

use num_complex::Complex64;

use super::linear;
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, ComplexVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    /// Input length `D`.
    pub dim: usize,
    /// Kernel side `k`.
    pub kernel: usize,
    /// Step `s`.
    pub step: usize,
    /// Matrix count `n = ceil(k / s)`.
    pub matrices: usize,
    /// Effective step `s0 = n * s - k`.
    pub gap: usize,
    /// Kernel copies in `M_1`, `ceil(D / (n * s))`.
    pub kernels_per_matrix: usize,
}

impl ConvGeometry {
    pub fn new(dim: usize, kernel: usize, step: usize) -> Result<Self> {
        if step == 0 {
            return Err(Error::InvalidArgument("convolution step must be at least 1".into()));
        }
        if kernel == 0 || kernel > dim {
            return Err(Error::InvalidArgument(format!(
                "convolution kernel side {kernel} must be in 1..={dim}"
            )));
        }
        let matrices = kernel.div_ceil(step);
        let period = matrices * step;
        Ok(Self {
            dim,
            kernel,
            step,
            matrices,
            gap: period - kernel,
            kernels_per_matrix: dim.div_ceil(period),
        })
    }

    /// Distance between consecutive kernel copies within one matrix.
    pub fn period(&self) -> usize {
        self.matrices * self.step
    }

    /// 0-based top-left offsets of the kernel copies in matrix `i`
    /// (0-based, so `i = 0` is `M_1`). Copies whose origin lies past `D` are
    /// dropped entirely.
    pub fn block_origins(&self, i: usize) -> Vec<usize> {
        let shift = i * self.step;
        (0..self.kernels_per_matrix)
            .map(|x| x * self.period() + shift)
            .filter(|&o| o < self.dim)
            .collect()
    }
}

/// Geometry plus the trainable kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvPlan {
    pub geometry: ConvGeometry,
    pub kernel: ComplexMatrix,
}

pub fn build_conv_plan(kernel: ComplexMatrix, dim: usize, k: usize, s: usize) -> Result<ConvPlan> {
    ConvPlan::new(kernel, dim, k, s)
}

impl ConvPlan {
    pub fn new(kernel: ComplexMatrix, dim: usize, k: usize, s: usize) -> Result<Self> {
        let geometry = ConvGeometry::new(dim, k, s)?;
        if kernel.rows != k || kernel.cols != k {
            return Err(Error::shape("convolution kernel", k * k, kernel.rows * kernel.cols));
        }
        Ok(Self { geometry, kernel })
    }

    /// Dense `M_{i+1}`.
    pub fn matrix(&self, i: usize) -> ComplexMatrix {
        let g = &self.geometry;
        let mut m = ComplexMatrix::zeros(g.dim, g.dim);
        for o in g.block_origins(i) {
            for y in 0..g.kernel.min(g.dim - o) {
                for z in 0..g.kernel.min(g.dim - o) {
                    m.set(o + y, o + z, self.kernel.get(y, z));
                }
            }
        }
        m
    }

    pub fn matrices(&self) -> Vec<ComplexMatrix> {
        (0..self.geometry.matrices).map(|i| self.matrix(i)).collect()
    }

    /// Dense `M_f = M_1 * ... * M_n`.
    pub fn product(&self) -> ComplexMatrix {
        let mut acc = self.matrix(0);
        for i in 1..self.geometry.matrices {
            acc = acc.matmul(&self.matrix(i)).expect("square matrices of equal size");
        }
        acc
    }

    /// `x * M_i` using only the kernel blocks of matrix `i` (0-based).
    fn apply_stage(&self, i: usize, x: &ComplexVector) -> ComplexVector {
        let g = &self.geometry;
        let mut out = ComplexVector::zeros(g.dim);
        for o in g.block_origins(i) {
            let width = g.kernel.min(g.dim - o);
            for y in 0..width {
                let xv = x.get(o + y);
                if xv == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for z in 0..width {
                    let acc = out.get(o + z) + xv * self.kernel.get(y, z);
                    out.set(o + z, acc);
                }
            }
        }
        out
    }

    /// Applies `M_1`, then `M_2`, ..., then `M_n`; returns the input followed by
    /// every intermediate result, so the last entry is `x * M_f`.
    pub fn forward_stages(&self, x: &ComplexVector) -> Result<Vec<ComplexVector>> {
        if x.len() != self.geometry.dim {
            return Err(Error::shape("quantum_conv input", self.geometry.dim, x.len()));
        }
        let mut stages = Vec::with_capacity(self.geometry.matrices + 1);
        stages.push(x.clone());
        for i in 0..self.geometry.matrices {
            let next = self.apply_stage(i, stages.last().expect("non-empty"));
            stages.push(next);
        }
        Ok(stages)
    }

    pub fn forward(&self, x: &ComplexVector) -> Result<ComplexVector> {
        Ok(self.forward_stages(x)?.pop().expect("non-empty"))
    }

    /// Gradients with respect to the input and the kernel. `stages` holds the
    /// input of each matrix (`stages[i]` enters `M_{i+1}`). Every placement of
    /// every kernel entry in every matrix contributes to the kernel gradient.
    pub fn backward(
        &self,
        stages: &[ComplexVector],
        grad_out: &ComplexVector,
    ) -> Result<(ComplexVector, ComplexMatrix)> {
        let g = &self.geometry;
        if stages.len() != g.matrices {
            return Err(Error::StaleTape(format!(
                "quantum_conv cache holds {} stages, plan has {} matrices",
                stages.len(),
                g.matrices
            )));
        }
        if grad_out.len() != g.dim {
            return Err(Error::shape("quantum_conv output gradient", g.dim, grad_out.len()));
        }
        let mut grad_k = ComplexMatrix::zeros(g.kernel, g.kernel);
        let mut grad = grad_out.clone();
        for i in (0..g.matrices).rev() {
            let input = &stages[i];
            let mut prev = ComplexVector::zeros(g.dim);
            for o in g.block_origins(i) {
                let width = g.kernel.min(g.dim - o);
                for y in 0..width {
                    let xc = input.get(o + y).conj();
                    let mut back = Complex64::new(0.0, 0.0);
                    for z in 0..width {
                        let gz = grad.get(o + z);
                        let acc = grad_k.get(y, z) + xc * gz;
                        grad_k.set(y, z, acc);
                        back += gz * self.kernel.get(y, z).conj();
                    }
                    prev.set(o + y, back);
                }
            }
            grad = prev;
        }
        Ok((grad, grad_k))
    }

    /// Kernel gradient through the dense product, used to cross-check
    /// [`ConvPlan::backward`] on small plans.
    pub fn dense_kernel_gradient(&self, x: &ComplexVector, grad_out: &ComplexVector) -> ComplexMatrix {
        let mats = self.matrices();
        let n = mats.len();
        let g = &self.geometry;
        let mut grad_k = ComplexMatrix::zeros(g.kernel, g.kernel);
        // dL/dM_i = (x M_1..M_{i-1})^H (G (M_{i+1}..M_n)^H)
        for i in 0..n {
            let mut left = x.clone();
            for m in &mats[..i] {
                left = m.apply(&left).expect("square");
            }
            let mut right = grad_out.clone();
            for m in mats[i + 1..].iter().rev() {
                right = m.apply_adjoint(&right).expect("square");
            }
            let mut dm = ComplexMatrix::zeros(g.dim, g.dim);
            linear::accumulate_outer(&mut dm, &left, &right);
            for o in g.block_origins(i) {
                let width = g.kernel.min(g.dim - o);
                for y in 0..width {
                    for z in 0..width {
                        let acc = grad_k.get(y, z) + dm.get(o + y, o + z);
                        grad_k.set(y, z, acc);
                    }
                }
            }
        }
        grad_k
    }
}
