//! Complex singular value decomposition by one-sided (Hestenes) Jacobi
//! rotations, and the amplification normalization that bounds the diagonal
//! factor by one.
//!
//! Factors follow the interferometer layout `M = beta * V * diag(sigma) * U`
//! where `V` is `N1 x N1`, `U` is `N2 x N2` and `diag(sigma)` is the
//! rectangular `N1 x N2` diagonal.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;

const MAX_SWEEPS: usize = 80;

#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub v: ComplexMatrix,
    pub sigma: Vec<f64>,
    pub u: ComplexMatrix,
    pub beta: f64,
}

impl SvdFactors {
    /// Rebuilds `beta * V * diag(sigma) * U`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let (n1, n2) = (self.v.rows, self.u.cols);
        let mut scaled = ComplexMatrix::zeros(n1, n2);
        // V * diag(sigma) only touches the first min(N1, N2) columns of V.
        for r in 0..n1 {
            for (k, &s) in self.sigma.iter().enumerate() {
                let vk = self.v.get(r, k) * (s * self.beta);
                if vk == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..n2 {
                    let cur = scaled.get(r, c);
                    scaled.set(r, c, cur + vk * self.u.get(k, c));
                }
            }
        }
        scaled
    }
}

/// Computes the SVD of `m` with `beta = 1`.
pub fn svd(m: &ComplexMatrix) -> Result<SvdFactors> {
    if !m.is_finite() {
        return Err(Error::NonFinite("svd input"));
    }
    if m.rows == 0 || m.cols == 0 {
        return Err(Error::InvalidArgument("svd of an empty matrix".into()));
    }
    if m.rows >= m.cols {
        let (left, sigma, right) = jacobi_tall(m);
        // m = left * S * right^H
        Ok(SvdFactors {
            v: left,
            sigma,
            u: right.adjoint(),
            beta: 1.0,
        })
    } else {
        // m^H = left * S * right^H  =>  m = right * S * left^H
        let (left, sigma, right) = jacobi_tall(&m.adjoint());
        Ok(SvdFactors {
            v: right,
            sigma,
            u: left.adjoint(),
            beta: 1.0,
        })
    }
}

/// Rescales the factors so the largest singular value is one, moving the scale
/// into `beta`. A zero matrix keeps `beta = 1`.
pub fn amplification_normalize(f: SvdFactors) -> SvdFactors {
    let max = f.sigma.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return SvdFactors { beta: 1.0, ..f };
    }
    SvdFactors {
        sigma: f.sigma.iter().map(|s| s / max).collect(),
        beta: f.beta * max,
        ..f
    }
}

/// One-sided Jacobi on a tall (`rows >= cols`) matrix. Returns a full unitary
/// left factor (`rows x rows`), the singular values in nonincreasing order, and
/// the unitary right factor (`cols x cols`) such that `a = L * S * R^H`.
fn jacobi_tall(a: &ComplexMatrix) -> (ComplexMatrix, Vec<f64>, ComplexMatrix) {
    let (m, n) = (a.rows, a.cols);
    // Work column-major: cols[j] is column j.
    let mut w: Vec<Vec<Complex64>> = (0..n)
        .map(|j| (0..m).map(|i| a.get(i, j)).collect())
        .collect();
    let mut v: Vec<Vec<Complex64>> = (0..n)
        .map(|j| {
            let mut col = vec![Complex64::new(0.0, 0.0); n];
            col[j] = Complex64::new(1.0, 0.0);
            col
        })
        .collect();

    let tol = f64::EPSILON * (m as f64);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha: f64 = w[p].iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = w[q].iter().map(|z| z.norm_sqr()).sum();
                let gamma: Complex64 = w[p].iter().zip(&w[q]).map(|(x, y)| x.conj() * y).sum();
                let g = gamma.norm();
                if g == 0.0 || g <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                // Phase-align column q so that <w_p, w_q> is real and positive,
                // then apply a real Jacobi rotation.
                let phase = (gamma / g).conj();
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, phase, c, s);
                rotate(&mut v, p, q, phase, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<(f64, usize)> = w
        .iter()
        .enumerate()
        .map(|(j, col)| (col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt(), j))
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let sigma: Vec<f64> = order.iter().map(|&(s, _)| s).collect();
    let smax = sigma.first().copied().unwrap_or(0.0);
    let cutoff = smax * f64::EPSILON * (m.max(n) as f64);

    let mut left_cols: Vec<Vec<Complex64>> = Vec::with_capacity(m);
    for &(s, j) in &order {
        if s > cutoff && s > 0.0 {
            left_cols.push(w[j].iter().map(|z| z / s).collect());
        } else {
            break;
        }
    }
    complete_basis(&mut left_cols, m);

    let left = ComplexMatrix::from_fn(m, m, |i, k| left_cols[k][i]);
    let right = ComplexMatrix::from_fn(n, n, |i, k| v[order[k].1][i]);
    (left, sigma, right)
}

fn rotate(cols: &mut [Vec<Complex64>], p: usize, q: usize, phase: Complex64, c: f64, s: f64) {
    let (head, tail) = cols.split_at_mut(q);
    let (cp, cq) = (&mut head[p], &mut tail[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let yq = *y * phase;
        let xp = *x;
        *x = xp * c - yq * s;
        *y = xp * s + yq * c;
    }
}

/// Extends an orthonormal set of columns to a basis of `C^dim` by
/// Gram-Schmidt against the standard basis.
fn complete_basis(cols: &mut Vec<Vec<Complex64>>, dim: usize) {
    let mut e = 0;
    while cols.len() < dim && e < dim {
        let mut cand = vec![Complex64::new(0.0, 0.0); dim];
        cand[e] = Complex64::new(1.0, 0.0);
        e += 1;
        // Two passes of modified Gram-Schmidt.
        for _ in 0..2 {
            for col in cols.iter() {
                let proj: Complex64 = col.iter().zip(&cand).map(|(a, b)| a.conj() * b).sum();
                for (c, a) in cand.iter_mut().zip(col) {
                    *c -= proj * a;
                }
            }
        }
        let norm = cand.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-8 {
            cols.push(cand.into_iter().map(|z| z / norm).collect());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unitarity_residual(m: &ComplexMatrix) -> f64 {
        let prod = m.matmul(&m.adjoint()).unwrap();
        prod.max_abs_diff(&ComplexMatrix::identity(m.rows))
    }

    #[test]
    fn identity_has_unit_singular_values() {
        let f = svd(&ComplexMatrix::identity(4)).unwrap();
        for s in &f.sigma {
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn diagonal_singular_values() {
        let mut m = ComplexMatrix::zeros(2, 2);
        m.re[0] = 3.0;
        m.re[3] = 1.0;
        let f = svd(&m).unwrap();
        assert!((f.sigma[0] - 3.0).abs() < 1e-14);
        assert!((f.sigma[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_matrix_has_full_unitary_factors() {
        let f = svd(&ComplexMatrix::zeros(3, 2)).unwrap();
        assert!(f.sigma.iter().all(|&s| s == 0.0));
        assert!(unitarity_residual(&f.v) < 1e-12);
        assert!(unitarity_residual(&f.u) < 1e-12);
        let f = amplification_normalize(f);
        assert_eq!(f.beta, 1.0);
    }

    #[test]
    fn rank_deficient_wide_matrix() {
        // rank one 2 x 3
        let m = ComplexMatrix::from_fn(2, 3, |r, c| {
            Complex64::new((r + 1) as f64, 0.5) * Complex64::new(c as f64 - 1.0, 1.0)
        });
        let f = svd(&m).unwrap();
        assert!(f.sigma[1].abs() < 1e-12);
        assert!(unitarity_residual(&f.v) < 1e-10);
        assert!(unitarity_residual(&f.u) < 1e-10);
        assert!(f.reconstruct().max_abs_diff(&m) < 1e-12 * m.max_abs().max(1.0));
    }

    #[test]
    fn normalization_examples() {
        let base = SvdFactors {
            v: ComplexMatrix::identity(2),
            sigma: vec![2.0, 0.5],
            u: ComplexMatrix::identity(2),
            beta: 1.0,
        };
        let f = amplification_normalize(base.clone());
        assert_eq!(f.beta, 2.0);
        assert_eq!(f.sigma, vec![1.0, 0.25]);

        let f = amplification_normalize(SvdFactors {
            sigma: vec![1.0, 1.0],
            ..base.clone()
        });
        assert_eq!(f.beta, 1.0);
        assert_eq!(f.sigma, vec![1.0, 1.0]);

        let f = amplification_normalize(SvdFactors {
            sigma: vec![0.0, 0.0],
            ..base
        });
        assert_eq!(f.beta, 1.0);
        assert_eq!(f.sigma, vec![0.0, 0.0]);
    }

    #[test]
    fn rejects_non_finite() {
        let mut m = ComplexMatrix::zeros(2, 2);
        m.im[1] = f64::NAN;
        assert!(matches!(svd(&m), Err(Error::NonFinite(_))));
    }
}
