//! Hidden-layer activations and the scaled softmax.
//!
//! The switch function is `0` for `x <= 0` and `tanh^2(x/2)` above, a
//! sigmoid that solves `y' = sqrt(y) (1 - y)`. Its reciprocal on `x > 0` is
//! `coth^2(x/2)`, which solves the same equation from above `y = 1`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Switch,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => relu(x),
            Activation::Switch => switch_sigma(x),
        }
    }

    /// Derivative, with the value `0` assigned at `x = 0` for both.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => relu_prime(x),
            Activation::Switch => switch_sigma_prime(x),
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Switch => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Switch),
            _ => None,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Switch => "switch",
        })
    }
}

impl FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "switch" => Ok(Activation::Switch),
            other => Err(format!("unknown activation {other:?} (expected relu or switch)")),
        }
    }
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

pub fn relu_prime(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

pub fn switch_sigma(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        let t = (0.5 * x).tanh();
        t * t
    }
}

/// `tanh(x/2) sech^2(x/2)` for `x > 0`, else `0`.
pub fn switch_sigma_prime(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        let t = (0.5 * x).tanh();
        t * (1.0 - t * t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("switch_rho is defined only for x > 0, got {0}")]
pub struct DomainError(pub f64);

/// `coth^2(x/2)`, the reciprocal of the switch function on `x > 0`.
pub fn switch_rho(x: f64) -> Result<f64, DomainError> {
    if x > 0.0 {
        let t = (0.5 * x).tanh();
        Ok(1.0 / (t * t))
    } else {
        Err(DomainError(x))
    }
}

/// Right-hand side of the switch equation, `sqrt(y) (1 - y)`.
pub fn switch_ode_rhs(y: f64) -> f64 {
    y.sqrt() * (1.0 - y)
}

/// `softmax(z / scale)` with max subtraction.
pub fn softmax_scaled(z: &[f64], scale: f64) -> Vec<f64> {
    let mut out = vec![0.0; z.len()];
    softmax_scaled_into(z, scale, &mut out);
    out
}

pub(crate) fn softmax_scaled_into(z: &[f64], scale: f64, out: &mut [f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &v) in out.iter_mut().zip(z) {
        *o = ((v - max) / scale).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
    // log of the normalizer, for log-softmax: ln p_k = (z_k - max)/s - ln(sum)
    sum.ln()
}
