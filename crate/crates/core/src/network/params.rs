use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ModelConfig, NetworkError};

/// Trainable state `p = (W, b)` held as one flat vector.
///
/// Layer `l` maps `layer_sizes[l]` inputs to `layer_sizes[l + 1]` outputs.
/// Its block in the flat vector is the weight matrix (row-major, one row per
/// output unit) followed by the bias vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    layer_sizes: Vec<usize>,
    values: Vec<f64>,
}

/// Total number of weights and biases, `sum(in * out + out)` over layers.
pub fn param_count(layer_sizes: &[usize]) -> usize {
    layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Params {
    pub fn zeros(config: &ModelConfig) -> Self {
        Self {
            layer_sizes: config.layer_sizes().to_vec(),
            values: vec![0.0; config.param_count()],
        }
    }

    /// Rebuilds parameters from a flat vector.
    pub fn from_flat(config: &ModelConfig, values: Vec<f64>) -> Result<Self, NetworkError> {
        let expected = config.param_count();
        if values.len() != expected {
            return Err(NetworkError::ParamLength {
                expected,
                found: values.len(),
            });
        }
        Ok(Self {
            layer_sizes: config.layer_sizes().to_vec(),
            values,
        })
    }

    pub fn flat(&self) -> &[f64] {
        &self.values
    }

    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn layer_count(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// Offset of layer `l`'s weight block in the flat vector.
    pub fn layer_offset(&self, layer: usize) -> usize {
        param_count(&self.layer_sizes[..=layer])
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        let (start, n_in, n_out) = self.block(layer);
        &self.values[start..start + n_in * n_out]
    }

    pub fn biases(&self, layer: usize) -> &[f64] {
        let (start, n_in, n_out) = self.block(layer);
        &self.values[start + n_in * n_out..start + n_in * n_out + n_out]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut [f64] {
        let (start, n_in, n_out) = self.block(layer);
        &mut self.values[start..start + n_in * n_out]
    }

    pub fn biases_mut(&mut self, layer: usize) -> &mut [f64] {
        let (start, n_in, n_out) = self.block(layer);
        &mut self.values[start + n_in * n_out..start + n_in * n_out + n_out]
    }

    fn block(&self, layer: usize) -> (usize, usize, usize) {
        (
            self.layer_offset(layer),
            self.layer_sizes[layer],
            self.layer_sizes[layer + 1],
        )
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Every entry i.i.d. uniform on the open interval `(-r, r)`.
pub fn init_params(config: &ModelConfig, seed: u64) -> Params {
    let r = config.init_range();
    let dist = Uniform::new(-r, r).expect("init range validated positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..config.param_count())
        .map(|_| loop {
            let v: f64 = dist.sample(&mut rng);
            if v != -r {
                break v;
            }
        })
        .collect();
    Params {
        layer_sizes: config.layer_sizes().to_vec(),
        values,
    }
}
