//! Complex linear layer `y = x * M`.

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, ComplexVector};

pub fn forward(x: &ComplexVector, m: &ComplexMatrix) -> Result<ComplexVector> {
    m.apply(x)
}

/// Returns `(dL/dx, dL/dM)`.
///
/// With `G = dL/dy_re + i dL/dy_im`, the weight gradient is
/// `dL/dM_ab = conj(x_a) G_b` and the input gradient is `G * M^H`.
pub fn backward(
    x: &ComplexVector,
    m: &ComplexMatrix,
    grad_out: &ComplexVector,
) -> Result<(ComplexVector, ComplexMatrix)> {
    if x.len() != m.rows {
        return Err(Error::shape("complex_linear cached input", m.rows, x.len()));
    }
    let grad_x = m.apply_adjoint(grad_out)?;
    let mut grad_m = ComplexMatrix::zeros(m.rows, m.cols);
    accumulate_outer(&mut grad_m, x, grad_out);
    Ok((grad_x, grad_m))
}

/// `acc += conj(x)^T * g`.
pub(crate) fn accumulate_outer(acc: &mut ComplexMatrix, x: &ComplexVector, g: &ComplexVector) {
    let n = acc.cols;
    for a in 0..acc.rows {
        let (xr, xi) = (x.re[a], x.im[a]);
        if xr == 0.0 && xi == 0.0 {
            continue;
        }
        let rr = &mut acc.re[a * n..(a + 1) * n];
        for (o, (&gr, &gi)) in rr.iter_mut().zip(g.re.iter().zip(&g.im)) {
            *o += xr * gr + xi * gi;
        }
        let ri = &mut acc.im[a * n..(a + 1) * n];
        for (o, (&gr, &gi)) in ri.iter_mut().zip(g.re.iter().zip(&g.im)) {
            *o += xr * gi - xi * gr;
        }
    }
}
