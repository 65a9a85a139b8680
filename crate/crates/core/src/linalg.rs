//! Complex vectors and matrices stored as paired real/imaginary arrays.
//!
//! Vectors are row vectors: a matrix `M` of shape `N1 x N2` maps an input of
//! length `N1` to an output of length `N2` through `y = x * M`. Under the real
//! block embedding `[[M_R, M_C], [-M_C, M_R]]` the same product reads
//! `[y_re, y_im] = [x_re, x_im] * embed(M)`.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Complex vector of length `N >= 1` held as separate real and imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVector {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl ComplexVector {
    pub fn new(re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        if re.len() != im.len() {
            return Err(Error::shape("complex vector parts", re.len(), im.len()));
        }
        if re.is_empty() {
            return Err(Error::InvalidArgument("complex vector must be non-empty".into()));
        }
        Ok(Self { re, im })
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            re: vec![0.0; len],
            im: vec![0.0; len],
        }
    }

    pub fn from_complex(values: &[Complex64]) -> Self {
        Self {
            re: values.iter().map(|z| z.re).collect(),
            im: values.iter().map(|z| z.im).collect(),
        }
    }

    /// Builds a vector from the concatenated form `[re, im]`.
    pub fn from_concat(flat: &[f64]) -> Result<Self> {
        if !flat.len().is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "concatenated complex vector has odd length {}",
                flat.len()
            )));
        }
        let half = flat.len() / 2;
        Self::new(flat[..half].to_vec(), flat[half..].to_vec())
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn get(&self, i: usize) -> Complex64 {
        Complex64::new(self.re[i], self.im[i])
    }

    pub fn set(&mut self, i: usize, z: Complex64) {
        self.re[i] = z.re;
        self.im[i] = z.im;
    }

    /// Concatenated `[re, im]` form of length `2N`.
    pub fn concat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.len());
        out.extend_from_slice(&self.re);
        out.extend_from_slice(&self.im);
        out
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(&re, &im)| Complex64::new(re, im))
            .collect()
    }
}

/// Dense real matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RealMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl RealMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn matmul(&self, other: &RealMatrix) -> Result<RealMatrix> {
        if self.cols != other.rows {
            return Err(Error::shape("real matmul", self.cols, other.rows));
        }
        let mut out = RealMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Row vector times matrix.
    pub fn left_apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.rows {
            return Err(Error::shape("real row-vector product", self.rows, x.len()));
        }
        let mut out = vec![0.0; self.cols];
        for (r, &xv) in x.iter().enumerate() {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            for (o, &m) in out.iter_mut().zip(row) {
                *o += xv * m;
            }
        }
        Ok(out)
    }

    /// Views this matrix as a complex matrix with zero imaginary part.
    pub fn to_complex(&self) -> ComplexMatrix {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            re: self.data.clone(),
            im: vec![0.0; self.data.len()],
        }
    }
}

/// Complex `rows x cols` matrix with real part `M_R` and imaginary part `M_C`,
/// both row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            re: vec![0.0; rows * cols],
            im: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.re[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_parts(rows: usize, cols: usize, re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        if re.len() != rows * cols {
            return Err(Error::shape("complex matrix real part", rows * cols, re.len()));
        }
        if im.len() != rows * cols {
            return Err(Error::shape(
                "complex matrix imaginary part",
                rows * cols,
                im.len(),
            ));
        }
        Ok(Self { rows, cols, re, im })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.set(r, c, f(r, c));
            }
        }
        m
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        let i = r * self.cols + c;
        Complex64::new(self.re[i], self.im[i])
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, z: Complex64) {
        let i = r * self.cols + c;
        self.re[i] = z.re;
        self.im[i] = z.im;
    }

    pub fn is_finite(&self) -> bool {
        self.re.iter().chain(&self.im).all(|v| v.is_finite())
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c).conj());
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(&a, &b)| a.hypot(b))
            .fold(0.0, f64::max)
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        (0..self.len())
            .map(|i| (self.re[i] - other.re[i]).hypot(self.im[i] - other.im[i]))
            .fold(0.0, f64::max)
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.cols != other.rows {
            return Err(Error::shape("complex matmul", self.cols, other.rows));
        }
        let n = other.cols;
        let mut out = ComplexMatrix::zeros(self.rows, n);
        for i in 0..self.rows {
            let (or, oi) = (
                &mut out.re[i * n..(i + 1) * n],
                &mut out.im[i * n..(i + 1) * n],
            );
            for k in 0..self.cols {
                let ar = self.re[i * self.cols + k];
                let ai = self.im[i * self.cols + k];
                if ar == 0.0 && ai == 0.0 {
                    continue;
                }
                let br = &other.re[k * n..(k + 1) * n];
                let bi = &other.im[k * n..(k + 1) * n];
                for j in 0..n {
                    or[j] += ar * br[j] - ai * bi[j];
                    oi[j] += ar * bi[j] + ai * br[j];
                }
            }
        }
        Ok(out)
    }

    /// Row-vector product `x * M`.
    pub fn apply(&self, x: &ComplexVector) -> Result<ComplexVector> {
        if x.len() != self.rows {
            return Err(Error::shape("complex apply (input dimension)", self.rows, x.len()));
        }
        let n = self.cols;
        let mut out = ComplexVector::zeros(n);
        for r in 0..self.rows {
            let (xr, xi) = (x.re[r], x.im[r]);
            if xr == 0.0 && xi == 0.0 {
                continue;
            }
            let mr = &self.re[r * n..(r + 1) * n];
            let mi = &self.im[r * n..(r + 1) * n];
            for j in 0..n {
                out.re[j] += xr * mr[j] - xi * mi[j];
                out.im[j] += xr * mi[j] + xi * mr[j];
            }
        }
        Ok(out)
    }

    /// Row-vector product against the conjugate transpose: `g * M^H`.
    ///
    /// This is the adjoint direction used to propagate gradients through `x * M`.
    pub fn apply_adjoint(&self, g: &ComplexVector) -> Result<ComplexVector> {
        if g.len() != self.cols {
            return Err(Error::shape("complex adjoint apply", self.cols, g.len()));
        }
        let n = self.cols;
        let mut out = ComplexVector::zeros(self.rows);
        for r in 0..self.rows {
            let mr = &self.re[r * n..(r + 1) * n];
            let mi = &self.im[r * n..(r + 1) * n];
            let (mut sr, mut si) = (0.0, 0.0);
            for j in 0..n {
                // g_j * conj(M_rj)
                sr += g.re[j] * mr[j] + g.im[j] * mi[j];
                si += g.im[j] * mr[j] - g.re[j] * mi[j];
            }
            out.re[r] = sr;
            out.im[r] = si;
        }
        Ok(out)
    }

    /// Real block embedding `[[M_R, M_C], [-M_C, M_R]]` of shape `2N1 x 2N2`.
    pub fn embed_block(&self) -> RealMatrix {
        let (n1, n2) = (self.rows, self.cols);
        let mut out = RealMatrix::zeros(2 * n1, 2 * n2);
        for r in 0..n1 {
            for c in 0..n2 {
                let i = r * n2 + c;
                out.set(r, c, self.re[i]);
                out.set(r, n2 + c, self.im[i]);
                out.set(n1 + r, c, -self.im[i]);
                out.set(n1 + r, n2 + c, self.re[i]);
            }
        }
        out
    }

    /// Applies the matrix through its real block embedding.
    pub fn apply_embedded(&self, x: &ComplexVector) -> Result<ComplexVector> {
        if x.len() != self.rows {
            return Err(Error::shape("complex apply (input dimension)", self.rows, x.len()));
        }
        let y = self.embed_block().left_apply(&x.concat())?;
        ComplexVector::from_concat(&y)
    }
}

/// Free-function form of [`ComplexMatrix::embed_block`].
pub fn embed_block(m: &ComplexMatrix) -> RealMatrix {
    m.embed_block()
}

/// Free-function form of [`ComplexMatrix::apply`].
pub fn apply(m: &ComplexMatrix, x: &ComplexVector) -> Result<ComplexVector> {
    m.apply(x)
}
