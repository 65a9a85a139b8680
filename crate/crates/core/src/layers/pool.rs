//! 1-D max pooling applied separately to the real and imaginary halves.

use crate::error::{Error, Result};
use crate::linalg::ComplexVector;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolCache {
    pub in_len: usize,
    /// Winning input index per output window, real part.
    pub argmax_re: Vec<usize>,
    /// Winning input index per output window, imaginary part.
    pub argmax_im: Vec<usize>,
}

/// Output length `floor((len - window) / stride) + 1`.
pub fn pooled_len(len: usize, window: usize, stride: usize) -> Result<usize> {
    if window == 0 || stride == 0 {
        return Err(Error::InvalidArgument(format!(
            "pool window ({window}) and stride ({stride}) must be at least 1"
        )));
    }
    if window > len {
        return Err(Error::InvalidArgument(format!(
            "pool window {window} exceeds input length {len}"
        )));
    }
    Ok((len - window) / stride + 1)
}

fn pool_part(values: &[f64], window: usize, stride: usize, out_len: usize) -> (Vec<f64>, Vec<usize>) {
    let mut out = Vec::with_capacity(out_len);
    let mut arg = Vec::with_capacity(out_len);
    for j in 0..out_len {
        let start = j * stride;
        let mut best = start;
        for i in start + 1..start + window {
            // strict comparison keeps the lowest index on ties
            if values[i] > values[best] {
                best = i;
            }
        }
        out.push(values[best]);
        arg.push(best);
    }
    (out, arg)
}

pub fn forward(x: &ComplexVector, window: usize, stride: usize) -> Result<(ComplexVector, PoolCache)> {
    let out_len = pooled_len(x.len(), window, stride)?;
    let (re, argmax_re) = pool_part(&x.re, window, stride, out_len);
    let (im, argmax_im) = pool_part(&x.im, window, stride, out_len);
    Ok((
        ComplexVector { re, im },
        PoolCache {
            in_len: x.len(),
            argmax_re,
            argmax_im,
        },
    ))
}

/// Routes each output gradient to the single input slot that won its window.
pub fn backward(cache: &PoolCache, grad_out: &ComplexVector) -> Result<ComplexVector> {
    if grad_out.len() != cache.argmax_re.len() {
        return Err(Error::shape(
            "split_max_pool output gradient",
            cache.argmax_re.len(),
            grad_out.len(),
        ));
    }
    let mut g = ComplexVector::zeros(cache.in_len);
    for (j, &i) in cache.argmax_re.iter().enumerate() {
        g.re[i] += grad_out.re[j];
    }
    for (j, &i) in cache.argmax_im.iter().enumerate() {
        g.im[i] += grad_out.im[j];
    }
    Ok(g)
}
