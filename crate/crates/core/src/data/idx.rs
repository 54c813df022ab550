//! IDX reader for MNIST-style image and label files.
//!
//! Layout: a big-endian `u32` magic (`0x00000803` for rank-3 unsigned-byte
//! images, `0x00000801` for rank-1 unsigned-byte labels), one big-endian
//! `u32` per dimension, then the raw bytes. Gzip-compressed files (as the
//! official distribution ships them) are detected by their magic and
//! decompressed transparently.

use std::fs;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;
use thiserror::Error;

use super::{DataError, Dataset};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Error)]
pub enum IdxError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic 0x{found:08x}, expected 0x{expected:08x}")]
    BadMagic { expected: u32, found: u32 },
    #[error("truncated {field}: need {needed} bytes, have {available}")]
    Truncated {
        field: &'static str,
        needed: usize,
        available: usize,
    },
    #[error("dimension mismatch in {field}: {left} vs {right}")]
    DimensionMismatch {
        field: &'static str,
        left: usize,
        right: usize,
    },
    #[error("label {label} at index {index} is out of range for {classes} classes")]
    LabelOutOfRange { index: usize, label: u8, classes: usize },
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Images decoded row-per-image, pixels scaled to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageMatrix {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    /// `count * rows * cols` values, image-major.
    pub pixels: Vec<f64>,
}

impl ImageMatrix {
    pub fn image_len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn image(&self, index: usize) -> &[f64] {
        let n = self.image_len();
        &self.pixels[index * n..(index + 1) * n]
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, IdxError> {
    let io_err = |source| IdxError::Io {
        path: path.display().to_string(),
        source,
    };
    let raw = fs::read(path).map_err(io_err)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out).map_err(io_err)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], offset: usize, field: &'static str) -> Result<u32, IdxError> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(IdxError::Truncated {
            field,
            needed: offset + 4,
            available: bytes.len(),
        })
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<ImageMatrix, IdxError> {
    let magic = be_u32(bytes, 0, "magic")?;
    if magic != IMAGE_MAGIC {
        return Err(IdxError::BadMagic {
            expected: IMAGE_MAGIC,
            found: magic,
        });
    }
    let count = be_u32(bytes, 4, "image count")? as usize;
    let rows = be_u32(bytes, 8, "row count")? as usize;
    let cols = be_u32(bytes, 12, "column count")? as usize;
    let body = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or(IdxError::DimensionMismatch {
            field: "image size overflows",
            left: count,
            right: rows * cols,
        })?;
    let data = &bytes[16..];
    if data.len() < body {
        return Err(IdxError::Truncated {
            field: "pixel data",
            needed: 16 + body,
            available: bytes.len(),
        });
    }
    if data.len() > body {
        return Err(IdxError::DimensionMismatch {
            field: "pixel data length",
            left: data.len(),
            right: body,
        });
    }
    let pixels = data.iter().map(|&b| f64::from(b) / 255.0).collect();
    Ok(ImageMatrix {
        count,
        rows,
        cols,
        pixels,
    })
}

/// Decodes labels; `classes` bounds every label when given.
pub fn parse_idx_labels(bytes: &[u8], classes: Option<usize>) -> Result<Vec<usize>, IdxError> {
    let magic = be_u32(bytes, 0, "magic")?;
    if magic != LABEL_MAGIC {
        return Err(IdxError::BadMagic {
            expected: LABEL_MAGIC,
            found: magic,
        });
    }
    let count = be_u32(bytes, 4, "label count")? as usize;
    let data = &bytes[8..];
    if data.len() < count {
        return Err(IdxError::Truncated {
            field: "label data",
            needed: 8 + count,
            available: bytes.len(),
        });
    }
    if data.len() > count {
        return Err(IdxError::DimensionMismatch {
            field: "label data length",
            left: data.len(),
            right: count,
        });
    }
    if let Some(c) = classes {
        if let Some((index, &label)) = data.iter().enumerate().find(|(_, &b)| b as usize >= c) {
            return Err(IdxError::LabelOutOfRange {
                index,
                label,
                classes: c,
            });
        }
    }
    Ok(data.iter().map(|&b| b as usize).collect())
}

pub fn load_idx_images(path: impl AsRef<Path>) -> Result<ImageMatrix, IdxError> {
    parse_idx_images(&read_file(path.as_ref())?)
}

pub fn load_idx_labels(path: impl AsRef<Path>, classes: Option<usize>) -> Result<Vec<usize>, IdxError> {
    parse_idx_labels(&read_file(path.as_ref())?, classes)
}

/// Loads an image/label file pair into a [`Dataset`] with `classes` classes.
pub fn load_idx_dataset(
    images: impl AsRef<Path>,
    labels: impl AsRef<Path>,
    classes: usize,
) -> Result<Dataset, IdxError> {
    let images = load_idx_images(images)?;
    let labels = load_idx_labels(labels, Some(classes))?;
    if images.count != labels.len() {
        return Err(IdxError::DimensionMismatch {
            field: "image count vs label count",
            left: images.count,
            right: labels.len(),
        });
    }
    let dim = images.image_len();
    Ok(Dataset::new(images.pixels, labels, dim, classes)?)
}

/// Encodes images (as raw bytes) in IDX form. Used for fixtures and exports.
pub fn encode_idx_images(count: usize, rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IMAGE_MAGIC, count as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}
