//! MNIST IDX ingestion, fold encoding into 392 complex amplitudes, and seeded
//! batching.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::ComplexVector;

pub const IMAGE_SIDE: usize = 28;
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;
/// Rows in each half of the folded image.
pub const FOLD_ROWS: usize = IMAGE_SIDE / 2;
/// Complex entries produced by folding one image.
pub const FOLDED_LEN: usize = FOLD_ROWS * IMAGE_SIDE;
pub const NUM_CLASSES: usize = 10;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImage {
    /// Row-major 28x28 grayscale values.
    pub pixels: Vec<u8>,
    pub label: u8,
}

impl RawImage {
    pub fn new(pixels: Vec<u8>, label: u8) -> Result<Self> {
        if pixels.len() != IMAGE_PIXELS {
            return Err(Error::shape("raw image pixels", IMAGE_PIXELS, pixels.len()));
        }
        if label as usize >= NUM_CLASSES {
            return Err(Error::Value(format!("label {label} is not a digit")));
        }
        Ok(Self { pixels, label })
    }

    /// Pixel at 0-based (row, col).
    pub fn at(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * IMAGE_SIDE + col]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldedInput {
    pub vec: ComplexVector,
    pub label: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub items: Vec<FoldedInput>,
    pub split: Split,
}

impl Dataset {
    pub fn from_raw(images: &[RawImage], split: Split) -> Self {
        Self {
            items: images.iter().map(fold_encode).collect(),
            split,
        }
    }

    /// Loads a pair of IDX files and fold-encodes every image.
    pub fn load(images: &Path, labels: &Path, split: Split) -> Result<Self> {
        let pixels = load_idx_images(&fs::read(images)?)?;
        let labels = load_idx_labels(&fs::read(labels)?)?;
        if pixels.len() != labels.len() {
            return Err(Error::shape("image/label count", pixels.len(), labels.len()));
        }
        let items = pixels
            .into_iter()
            .zip(labels)
            .map(|(p, l)| RawImage::new(p, l).map(|img| fold_encode(&img)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { items, split })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.items.iter().map(|it| it.label).collect()
    }

    /// First `n` items (or all of them), keeping the split tag.
    pub fn subset(&self, n: usize) -> Self {
        Self {
            items: self.items[..n.min(self.items.len())].to_vec(),
            split: self.split,
        }
    }
}

fn read_be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    let chunk = bytes.get(offset..offset + 4).ok_or(Error::Truncated {
        expected: offset + 4,
        actual: bytes.len(),
    })?;
    Ok(u32::from_be_bytes(chunk.try_into().expect("four bytes")))
}

/// Parses an IDX3 image file into one 784-byte buffer per image.
pub fn load_idx_images(bytes: &[u8]) -> Result<Vec<Vec<u8>>> {
    let magic = read_be_u32(bytes, 0)?;
    if magic != IMAGES_MAGIC {
        return Err(Error::Format(format!(
            "expected image magic {IMAGES_MAGIC:#010x}, found {magic:#010x}"
        )));
    }
    let count = read_be_u32(bytes, 4)? as usize;
    let rows = read_be_u32(bytes, 8)? as usize;
    let cols = read_be_u32(bytes, 12)? as usize;
    if rows != IMAGE_SIDE || cols != IMAGE_SIDE {
        return Err(Error::Format(format!(
            "expected {IMAGE_SIDE}x{IMAGE_SIDE} images, found {rows}x{cols}"
        )));
    }
    let expected = 16 + count * IMAGE_PIXELS;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            actual: bytes.len(),
        });
    }
    Ok(bytes[16..expected]
        .chunks_exact(IMAGE_PIXELS)
        .map(<[u8]>::to_vec)
        .collect())
}

/// Parses an IDX1 label file.
pub fn load_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = read_be_u32(bytes, 0)?;
    if magic != LABELS_MAGIC {
        return Err(Error::Format(format!(
            "expected label magic {LABELS_MAGIC:#010x}, found {magic:#010x}"
        )));
    }
    let count = read_be_u32(bytes, 4)? as usize;
    let expected = 8 + count;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            actual: bytes.len(),
        });
    }
    let labels = bytes[8..expected].to_vec();
    if let Some((i, &bad)) = labels
        .iter()
        .enumerate()
        .find(|(_, &l)| l as usize >= NUM_CLASSES)
    {
        return Err(Error::Value(format!("label {bad} at index {i} is not a digit")));
    }
    Ok(labels)
}

/// Folds the bottom half of the image onto the top half: pixel (x, y) of the
/// top half becomes the real part and pixel (x + 14, y) the imaginary part of
/// entry `x * 28 + y` (0-based, row-major). Values are scaled into `[0, 1]`.
pub fn fold_encode(img: &RawImage) -> FoldedInput {
    let (top, bottom) = img.pixels.split_at(FOLDED_LEN);
    let scale = |p: &u8| f64::from(*p) / 255.0;
    FoldedInput {
        vec: ComplexVector {
            re: top.iter().map(scale).collect(),
            im: bottom.iter().map(scale).collect(),
        },
        label: img.label,
    }
}

/// Inverse of [`fold_encode`] for inputs produced from integer pixels.
pub fn unfold(input: &FoldedInput) -> Result<RawImage> {
    if input.vec.len() != FOLDED_LEN {
        return Err(Error::shape("folded input", FOLDED_LEN, input.vec.len()));
    }
    let to_px = |v: &f64| (v * 255.0).round().clamp(0.0, 255.0) as u8;
    let pixels = input
        .vec
        .re
        .iter()
        .chain(&input.vec.im)
        .map(to_px)
        .collect();
    RawImage::new(pixels, input.label)
}

/// Seeded shuffled partition of `0..len` into batches of `batch_size` indices.
/// Every index appears exactly once; the final batch may be short.
pub fn batch_indices(len: usize, batch_size: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

/// Iterates shuffled batches of borrowed items.
pub fn batch_iter(
    ds: &Dataset,
    batch_size: usize,
    seed: u64,
) -> Result<impl Iterator<Item = Vec<&FoldedInput>> + '_> {
    let batches = batch_indices(ds.len(), batch_size, seed)?;
    Ok(batches
        .into_iter()
        .map(move |idx| idx.into_iter().map(|i| &ds.items[i]).collect()))
}
