#![allow(dead_code)]

use num_complex::Complex64;
use qocnn::{ComplexMatrix, ComplexVector, RawImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

pub fn random_vector(rng: &mut impl Rng, len: usize) -> ComplexVector {
    let re = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let im = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    ComplexVector::new(re, im).unwrap()
}

pub fn real_vector(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Inner product of the concatenated real components.
pub fn dot(a: &ComplexVector, b: &ComplexVector) -> f64 {
    a.concat().iter().zip(b.concat()).map(|(x, y)| x * y).sum()
}

/// Synthetic digit images: class `c` draws a short horizontal bar on rows
/// chosen by `c` and a vertical bar on columns chosen by `c`, over faint
/// seeded noise. Ink coverage is close to MNIST's.
pub fn synthetic_images(count: usize, seed: u64) -> Vec<RawImage> {
    let mut rng = rng(seed);
    (0..count)
        .map(|i| {
            let label = (i % 10) as u8;
            let c = label as usize;
            let mut pixels = vec![0u8; 784];
            for (p, px) in pixels.iter_mut().enumerate() {
                let (row, col) = (p / 28, p % 28);
                let bar = (2 * c + 4..2 * c + 6).contains(&row) && (6..22).contains(&col);
                let post = (2 * c + 4..2 * c + 6).contains(&col) && (6..22).contains(&row);
                let ink: u8 = if bar || post { 220 } else { 0 };
                *px = ink.saturating_add(rng.gen_range(0..20));
            }
            RawImage::new(pixels, label).unwrap()
        })
        .collect()
}

/// Images with every pixel drawn uniformly.
pub fn random_images(count: usize, seed: u64) -> Vec<RawImage> {
    let mut rng = rng(seed);
    (0..count)
        .map(|i| RawImage::new((0..784).map(|_| rng.gen()).collect(), (i % 10) as u8).unwrap())
        .collect()
}
