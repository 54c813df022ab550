//! Dense feedforward classifier `d -> n -> C`: hidden activation, scaled
//! softmax output, mean cross-entropy loss and its backpropagated gradient.

mod activation;
pub mod checkpoint;
mod params;

use std::ops::Range;

use thiserror::Error;

use crate::data::LabeledData;

pub use activation::{
    relu, relu_prime, softmax_scaled, switch_ode_rhs, switch_rho, switch_sigma, switch_sigma_prime, Activation,
    DomainError,
};
pub use params::{init_params, param_count, Params};

/// Probabilities are floored here inside the log of the loss.
pub const PROB_FLOOR: f64 = 1e-300;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("input dimension mismatch: model expects {expected}, data has {found}")]
    InputDim { expected: usize, found: usize },
    #[error("class count mismatch: model outputs {expected}, data has {found}")]
    ClassCount { expected: usize, found: usize },
    #[error("parameter vector has length {found}, expected {expected}")]
    ParamLength { expected: usize, found: usize },
    #[error("empty data")]
    EmptyData,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    layer_sizes: Vec<usize>,
    activation: Activation,
    softmax_scale: f64,
    init_range: f64,
}

impl ModelConfig {
    /// Config with the activation's customary defaults: ReLU pairs with
    /// `softmax(x/100)` and init on `(-5, 5)`; switch with the standard
    /// softmax and init on `(-0.5, 0.5)`.
    pub fn new(layer_sizes: Vec<usize>, activation: Activation) -> Result<Self, NetworkError> {
        let (scale, range) = match activation {
            Activation::Relu => (100.0, 5.0),
            Activation::Switch => (1.0, 0.5),
        };
        Self::with_options(layer_sizes, activation, scale, range)
    }

    pub fn with_options(
        layer_sizes: Vec<usize>,
        activation: Activation,
        softmax_scale: f64,
        init_range: f64,
    ) -> Result<Self, NetworkError> {
        if layer_sizes.len() < 2 {
            return Err(NetworkError::InvalidConfig(
                "need at least input and output layer sizes".into(),
            ));
        }
        if layer_sizes.contains(&0) {
            return Err(NetworkError::InvalidConfig(format!(
                "layer sizes must be positive, got {layer_sizes:?}"
            )));
        }
        if !(softmax_scale > 0.0 && softmax_scale.is_finite()) {
            return Err(NetworkError::InvalidConfig(format!(
                "softmax scale must be positive, got {softmax_scale}"
            )));
        }
        if !(init_range > 0.0 && init_range.is_finite()) {
            return Err(NetworkError::InvalidConfig(format!(
                "init range must be positive, got {init_range}"
            )));
        }
        Ok(Self {
            layer_sizes,
            activation,
            softmax_scale,
            init_range,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn softmax_scale(&self) -> f64 {
        self.softmax_scale
    }

    pub fn init_range(&self) -> f64 {
        self.init_range
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn class_count(&self) -> usize {
        *self.layer_sizes.last().expect("validated nonempty")
    }

    pub fn param_count(&self) -> usize {
        param_count(&self.layer_sizes)
    }

    fn check_params(&self, params: &Params) -> Result<(), NetworkError> {
        if params.layer_sizes() != self.layer_sizes.as_slice() {
            return Err(NetworkError::ParamLength {
                expected: self.param_count(),
                found: params.len(),
            });
        }
        Ok(())
    }

    fn check_data<D: LabeledData + ?Sized>(&self, data: &D) -> Result<(), NetworkError> {
        if data.input_dim() != self.input_dim() {
            return Err(NetworkError::InputDim {
                expected: self.input_dim(),
                found: data.input_dim(),
            });
        }
        if data.class_count() > self.class_count() {
            return Err(NetworkError::ClassCount {
                expected: self.class_count(),
                found: data.class_count(),
            });
        }
        Ok(())
    }
}

/// Intermediates of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    /// Pre-activations per layer (hidden layers, then the output logits).
    pub pre_activations: Vec<Vec<f64>>,
    /// Activations per layer, starting with the input itself.
    pub activations: Vec<Vec<f64>>,
    pub probabilities: Vec<f64>,
    /// `ln` of the softmax normalizer after max subtraction.
    log_normalizer: f64,
}

impl ForwardTrace {
    /// Argmax of the probabilities, lowest index on ties.
    pub fn predicted_class(&self) -> usize {
        argmax(&self.probabilities)
    }

    fn log_prob(&self, class: usize, scale: f64) -> f64 {
        let logits = self.pre_activations.last().expect("at least one layer");
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (logits[class] - max) / scale - self.log_normalizer
    }
}

/// Index of the first maximal entry.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn forward(config: &ModelConfig, params: &Params, input: &[f64]) -> Result<ForwardTrace, NetworkError> {
    config.check_params(params)?;
    if input.len() != config.input_dim() {
        return Err(NetworkError::InputDim {
            expected: config.input_dim(),
            found: input.len(),
        });
    }
    let mut scratch = Scratch::new(config);
    scratch.forward(config, params, input);
    Ok(scratch.to_trace())
}

pub fn predict(config: &ModelConfig, params: &Params, input: &[f64]) -> Result<usize, NetworkError> {
    Ok(forward(config, params, input)?.predicted_class())
}

/// Exact count of correctly classified samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PositiveRate {
    pub correct: usize,
    pub total: usize,
}

impl PositiveRate {
    pub fn fraction(&self) -> f64 {
        self.correct as f64 / self.total as f64
    }

    /// Integer equality `correct == total`.
    pub fn is_perfect(&self) -> bool {
        self.correct == self.total
    }
}

impl std::fmt::Display for PositiveRate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.correct, self.total)
    }
}

/// Summed (not averaged) loss and gradient over a range of samples, so that
/// shards can be merged exactly in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loss_sum: f64,
    /// Empty when the gradient was not requested.
    pub gradient_sum: Vec<f64>,
    pub correct: usize,
    pub count: usize,
}

impl Evaluation {
    pub fn mean_loss(&self) -> f64 {
        self.loss_sum / self.count as f64
    }

    pub fn mean_gradient(&self) -> Vec<f64> {
        let m = self.count as f64;
        self.gradient_sum.iter().map(|g| g / m).collect()
    }

    pub fn positive_rate(&self) -> PositiveRate {
        PositiveRate {
            correct: self.correct,
            total: self.count,
        }
    }

    /// Adds `other` into `self`; call in shard order for reproducible sums.
    pub fn merge(&mut self, other: &Evaluation) {
        self.loss_sum += other.loss_sum;
        if self.gradient_sum.is_empty() {
            self.gradient_sum = other.gradient_sum.clone();
        } else {
            for (a, b) in self.gradient_sum.iter_mut().zip(&other.gradient_sum) {
                *a += b;
            }
        }
        self.correct += other.correct;
        self.count += other.count;
    }
}

/// Evaluates samples `range` of `data`; the gradient is accumulated only
/// when `with_gradient` is set.
pub fn evaluate_range<D: LabeledData + ?Sized>(
    config: &ModelConfig,
    params: &Params,
    data: &D,
    range: Range<usize>,
    with_gradient: bool,
) -> Result<Evaluation, NetworkError> {
    config.check_params(params)?;
    config.check_data(data)?;
    let mut scratch = Scratch::new(config);
    let mut gradient_sum = if with_gradient {
        vec![0.0; config.param_count()]
    } else {
        Vec::new()
    };
    let mut loss_sum = 0.0;
    let mut correct = 0;
    let max_loss = -PROB_FLOOR.ln();
    for i in range.clone() {
        let input = data.input(i);
        let label = data.label(i);
        scratch.forward(config, params, &input);
        let log_p = scratch.log_prob(label, config.softmax_scale);
        loss_sum += (-log_p).min(max_loss);
        if argmax(&scratch.probs) == label {
            correct += 1;
        }
        if with_gradient {
            scratch.backward(config, params, label, &mut gradient_sum);
        }
    }
    Ok(Evaluation {
        loss_sum,
        gradient_sum,
        correct,
        count: range.len(),
    })
}

pub fn evaluate<D: LabeledData + ?Sized>(
    config: &ModelConfig,
    params: &Params,
    data: &D,
    with_gradient: bool,
) -> Result<Evaluation, NetworkError> {
    if data.is_empty() {
        return Err(NetworkError::EmptyData);
    }
    evaluate_range(config, params, data, 0..data.len(), with_gradient)
}

/// Mean cross-entropy of `softmax(z/s)` against the labels.
pub fn loss<D: LabeledData + ?Sized>(config: &ModelConfig, params: &Params, data: &D) -> Result<f64, NetworkError> {
    Ok(evaluate(config, params, data, false)?.mean_loss())
}

/// Gradient of [`loss`] with respect to the flat parameter vector.
pub fn grad<D: LabeledData + ?Sized>(
    config: &ModelConfig,
    params: &Params,
    data: &D,
) -> Result<Vec<f64>, NetworkError> {
    Ok(evaluate(config, params, data, true)?.mean_gradient())
}

pub fn positive_rate<D: LabeledData + ?Sized>(
    config: &ModelConfig,
    params: &Params,
    data: &D,
) -> Result<PositiveRate, NetworkError> {
    Ok(evaluate(config, params, data, false)?.positive_rate())
}

/// Per-sample correctness flags.
pub fn correctness<D: LabeledData + ?Sized>(
    config: &ModelConfig,
    params: &Params,
    data: &D,
) -> Result<Vec<bool>, NetworkError> {
    config.check_params(params)?;
    config.check_data(data)?;
    let mut scratch = Scratch::new(config);
    Ok((0..data.len())
        .map(|i| {
            scratch.forward(config, params, &data.input(i));
            argmax(&scratch.probs) == data.label(i)
        })
        .collect())
}

/// Output probabilities for every sample, row-major `len x C`.
pub fn probabilities<D: LabeledData + ?Sized>(
    config: &ModelConfig,
    params: &Params,
    data: &D,
) -> Result<Vec<Vec<f64>>, NetworkError> {
    config.check_params(params)?;
    config.check_data(data)?;
    let mut scratch = Scratch::new(config);
    Ok((0..data.len())
        .map(|i| {
            scratch.forward(config, params, &data.input(i));
            scratch.probs.clone()
        })
        .collect())
}

/// Reusable per-sample buffers for forward and backward passes.
struct Scratch {
    /// `acts[0]` is the input; `acts[l]` the activation feeding layer `l`.
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    /// Indices of nonzero entries of `acts[l]`; zero entries contribute
    /// nothing to products and (for hidden layers) have zero derivative.
    active: Vec<Vec<usize>>,
    probs: Vec<f64>,
    log_normalizer: f64,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl Scratch {
    fn new(config: &ModelConfig) -> Self {
        let sizes = config.layer_sizes();
        let widest = sizes.iter().copied().max().unwrap_or(1);
        Self {
            acts: sizes[..sizes.len() - 1].iter().map(|&n| vec![0.0; n]).collect(),
            pre: sizes[1..].iter().map(|&n| vec![0.0; n]).collect(),
            active: sizes[..sizes.len() - 1]
                .iter()
                .map(|&n| Vec::with_capacity(n))
                .collect(),
            probs: vec![0.0; config.class_count()],
            log_normalizer: 0.0,
            delta: Vec::with_capacity(widest),
            delta_prev: Vec::with_capacity(widest),
        }
    }

    fn forward(&mut self, config: &ModelConfig, params: &Params, input: &[f64]) {
        let layers = params.layer_count();
        self.acts[0].copy_from_slice(input);
        self.active[0].clear();
        self.active[0].extend(input.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(k, _)| k));
        for l in 0..layers {
            let n_in = params.layer_sizes()[l];
            let w = params.weights(l);
            let b = params.biases(l);
            let (a, active) = (&self.acts[l], &self.active[l]);
            let z = &mut self.pre[l];
            for (j, zj) in z.iter_mut().enumerate() {
                let row = &w[j * n_in..(j + 1) * n_in];
                let mut s = b[j];
                for &k in active {
                    s += row[k] * a[k];
                }
                *zj = s;
            }
            if l + 1 < layers {
                let act = config.activation();
                let next = &mut self.acts[l + 1];
                let next_active = &mut self.active[l + 1];
                next_active.clear();
                for (k, (&zk, out)) in self.pre[l].iter().zip(next.iter_mut()).enumerate() {
                    *out = act.apply(zk);
                    if zk > 0.0 {
                        next_active.push(k);
                    }
                }
            }
        }
        let logits = self.pre.last().expect("at least one layer");
        self.log_normalizer = activation::softmax_scaled_into(logits, config.softmax_scale(), &mut self.probs);
    }

    fn log_prob(&self, class: usize, scale: f64) -> f64 {
        let logits = self.pre.last().expect("at least one layer");
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (logits[class] - max) / scale - self.log_normalizer
    }

    /// Adds this sample's loss gradient into `grad`. Requires a preceding
    /// `forward` on the same sample.
    fn backward(&mut self, config: &ModelConfig, params: &Params, label: usize, grad: &mut [f64]) {
        let s = config.softmax_scale();
        let act = config.activation();
        self.delta.clear();
        self.delta.extend(self.probs.iter().enumerate().map(|(k, &p)| {
            let target = if k == label { 1.0 } else { 0.0 };
            (p - target) / s
        }));
        for l in (0..params.layer_count()).rev() {
            let n_in = params.layer_sizes()[l];
            let offset = params.layer_offset(l);
            let n_out = self.delta.len();
            let (a, active) = (&self.acts[l], &self.active[l]);
            {
                let (gw, rest) = grad[offset..].split_at_mut(n_in * n_out);
                let gb = &mut rest[..n_out];
                for (j, &dj) in self.delta.iter().enumerate() {
                    gb[j] += dj;
                    if dj == 0.0 {
                        continue;
                    }
                    let row = &mut gw[j * n_in..(j + 1) * n_in];
                    for &k in active {
                        row[k] += dj * a[k];
                    }
                }
            }
            if l == 0 {
                break;
            }
            let w = params.weights(l);
            self.delta_prev.clear();
            self.delta_prev.resize(n_in, 0.0);
            for (j, &dj) in self.delta.iter().enumerate() {
                if dj == 0.0 {
                    continue;
                }
                let row = &w[j * n_in..(j + 1) * n_in];
                for &k in active {
                    self.delta_prev[k] += row[k] * dj;
                }
            }
            let z_prev = &self.pre[l - 1];
            for &k in active {
                self.delta_prev[k] *= act.derivative(z_prev[k]);
            }
            std::mem::swap(&mut self.delta, &mut self.delta_prev);
        }
    }

    fn to_trace(&self) -> ForwardTrace {
        ForwardTrace {
            pre_activations: self.pre.clone(),
            activations: self.acts.clone(),
            probabilities: self.probs.clone(),
            log_normalizer: self.log_normalizer,
        }
    }
}

/// Loss evaluated on a single trace, for tests and diagnostics.
pub fn sample_loss(config: &ModelConfig, trace: &ForwardTrace, label: usize) -> f64 {
    (-trace.log_prob(label, config.softmax_scale())).min(-PROB_FLOOR.ln())
}
