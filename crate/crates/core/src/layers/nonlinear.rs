//! Elementwise nonlinearities and the output log-softmax.

use crate::linalg::ComplexVector;

/// Modulus below which mod_softplus maps an entry to zero.
pub const MOD_SOFTPLUS_ZERO: f64 = 1e-12;

#[inline]
fn sinusoid(t: f64, lambda: f64) -> f64 {
    t * (lambda * t).sin()
}

#[inline]
fn sinusoid_deriv(t: f64, lambda: f64) -> f64 {
    let lt = lambda * t;
    lt.sin() + lt * lt.cos()
}

/// `t * sin(lambda * t)` applied to every real and imaginary component.
pub fn sinusoid_forward(x: &ComplexVector, lambda: f64) -> ComplexVector {
    ComplexVector {
        re: x.re.iter().map(|&t| sinusoid(t, lambda)).collect(),
        im: x.im.iter().map(|&t| sinusoid(t, lambda)).collect(),
    }
}

pub fn sinusoid_backward(x: &ComplexVector, grad_out: &ComplexVector, lambda: f64) -> ComplexVector {
    let d = |t: &f64, g: &f64| g * sinusoid_deriv(*t, lambda);
    ComplexVector {
        re: x.re.iter().zip(&grad_out.re).map(|(t, g)| d(t, g)).collect(),
        im: x.im.iter().zip(&grad_out.im).map(|(t, g)| d(t, g)).collect(),
    }
}

/// `ln(1 + e^t)` without overflow.
#[inline]
pub fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

#[inline]
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Replaces each modulus `r` by `softplus(r)` and keeps the phase; entries
/// with modulus below [`MOD_SOFTPLUS_ZERO`] map to zero.
pub fn mod_softplus_forward(x: &ComplexVector) -> ComplexVector {
    let mut out = ComplexVector::zeros(x.len());
    for i in 0..x.len() {
        let (a, b) = (x.re[i], x.im[i]);
        let r = a.hypot(b);
        if r < MOD_SOFTPLUS_ZERO {
            continue;
        }
        let scale = softplus(r) / r;
        out.re[i] = a * scale;
        out.im[i] = b * scale;
    }
    out
}

pub fn mod_softplus_backward(x: &ComplexVector, grad_out: &ComplexVector) -> ComplexVector {
    let mut out = ComplexVector::zeros(x.len());
    for i in 0..x.len() {
        let (a, b) = (x.re[i], x.im[i]);
        let r = a.hypot(b);
        if r < MOD_SOFTPLUS_ZERO {
            continue;
        }
        // f = h(r) * (a, b) with h(r) = softplus(r) / r.
        let h = softplus(r) / r;
        let dh = (sigmoid(r) * r - softplus(r)) / (r * r);
        let k = dh / r;
        let (gr, gi) = (grad_out.re[i], grad_out.im[i]);
        // Jacobian [[h + k a^2, k a b], [k a b, h + k b^2]] is symmetric.
        out.re[i] = gr * (h + k * a * a) + gi * (k * a * b);
        out.im[i] = gr * (k * a * b) + gi * (h + k * b * b);
    }
    out
}

/// `|z|^2` per entry.
pub fn mod_squared_forward(x: &ComplexVector) -> Vec<f64> {
    x.re.iter().zip(&x.im).map(|(a, b)| a * a + b * b).collect()
}

pub fn mod_squared_backward(x: &ComplexVector, grad_out: &[f64]) -> ComplexVector {
    ComplexVector {
        re: x.re.iter().zip(grad_out).map(|(a, g)| 2.0 * a * g).collect(),
        im: x.im.iter().zip(grad_out).map(|(b, g)| 2.0 * b * g).collect(),
    }
}

/// `v - logsumexp(v)`, with the maximum subtracted first.
pub fn log_softmax(v: &[f64]) -> Vec<f64> {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    v.iter().map(|x| x - lse).collect()
}

pub fn log_softmax_backward(output: &[f64], grad_out: &[f64]) -> Vec<f64> {
    let total: f64 = grad_out.iter().sum();
    output
        .iter()
        .zip(grad_out)
        .map(|(y, g)| g - y.exp() * total)
        .collect()
}
