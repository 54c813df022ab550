use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{DataError, Dataset};

pub const MAX_BLOBS: usize = 256;

/// Gaussian blobs with one class per blob.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub blobs: usize,
    pub per_class: usize,
    /// Standard deviation of each blob. Zero collapses samples onto centers.
    pub spread: f64,
    pub dim: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(blobs: usize, per_class: usize, spread: f64, seed: u64) -> Self {
        Self {
            blobs,
            per_class,
            spread,
            dim: 2,
            seed,
        }
    }
}

/// Blob centers sit evenly on a circle of radius 0.3 around the middle of
/// the unit square (remaining coordinates at 0.5).
pub fn blob_center(blob: usize, blobs: usize, dim: usize) -> Vec<f64> {
    let mut c = vec![0.5; dim];
    let angle = TAU * blob as f64 / blobs as f64;
    c[0] = 0.5 + 0.3 * angle.cos();
    if dim > 1 {
        c[1] = 0.5 + 0.3 * angle.sin();
    }
    c
}

/// Samples are interleaved by class (`0, 1, .., k-1, 0, 1, ..`) and clamped
/// into `[0, 1]`.
pub fn make_synthetic(spec: &SyntheticSpec) -> Result<Dataset, DataError> {
    if spec.per_class == 0 {
        return Err(DataError::Synthetic("per_class must be positive".into()));
    }
    if spec.blobs == 0 || spec.blobs > MAX_BLOBS {
        return Err(DataError::Synthetic(format!(
            "blob count {} outside 1..={MAX_BLOBS}",
            spec.blobs
        )));
    }
    if spec.dim == 0 {
        return Err(DataError::Synthetic("dim must be positive".into()));
    }
    if !(spec.spread >= 0.0 && spec.spread.is_finite()) {
        return Err(DataError::Synthetic(format!(
            "spread {} must be finite and nonnegative",
            spec.spread
        )));
    }
    let centers: Vec<Vec<f64>> = (0..spec.blobs).map(|b| blob_center(b, spec.blobs, spec.dim)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut inputs = Vec::with_capacity(spec.blobs * spec.per_class * spec.dim);
    let mut labels = Vec::with_capacity(spec.blobs * spec.per_class);
    for _ in 0..spec.per_class {
        for (label, center) in centers.iter().enumerate() {
            for &c in center {
                let z: f64 = StandardNormal.sample(&mut rng);
                inputs.push((c + spec.spread * z).clamp(0.0, 1.0));
            }
            labels.push(label);
        }
    }
    Dataset::new(inputs, labels, spec.dim, spec.blobs)
}
