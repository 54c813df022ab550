//! Plain gradient descent `p <- p - alpha * grad L(p)`: shuffled minibatch
//! SGD for pre-training and budgeted full-batch descent for continuation
//! steps.

use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::data::{LabeledData, Subset};
use crate::network::{self, ModelConfig, NetworkError, Params, PositiveRate};

#[derive(Debug, Error)]
pub enum SgdError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
    #[error("non-finite loss {loss} at epoch {epoch}, step {step}")]
    NonFiniteLoss {
        loss: f64,
        epoch: usize,
        step: usize,
        /// Flat parameters at the failing evaluation.
        snapshot: Vec<f64>,
    },
}

/// One update `point <- point - rate * gradient`.
pub fn sgd_step(point: &mut [f64], gradient: &[f64], rate: f64) {
    assert_eq!(point.len(), gradient.len(), "gradient shape mismatch");
    for (p, g) in point.iter_mut().zip(gradient) {
        *p -= rate * g;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdSettings {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Seeds the per-epoch shuffles only.
    pub shuffle_seed: u64,
    /// Record a checkpoint every this many epochs (the last epoch is always
    /// recorded).
    pub report_every: usize,
    /// Stop once the training positive rate reaches this fraction.
    pub target_rate: Option<f64>,
    /// Fill in wall-clock seconds. Off by default so reports are
    /// reproducible byte for byte.
    pub record_time: bool,
}

impl SgdSettings {
    pub fn for_activation(activation: network::Activation) -> Self {
        let learning_rate = match activation {
            network::Activation::Switch => 0.1,
            network::Activation::Relu => 0.01,
        };
        Self {
            learning_rate,
            batch_size: 32,
            epochs: 10,
            shuffle_seed: 0,
            report_every: 1,
            target_rate: None,
            record_time: false,
        }
    }

    fn validate(&self) -> Result<(), SgdError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(SgdError::InvalidSettings(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(SgdError::InvalidSettings("batch size must be at least 1".into()));
        }
        if self.report_every == 0 {
            return Err(SgdError::InvalidSettings("report cadence must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainCheckpoint {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_rate: PositiveRate,
    pub test_rate: Option<PositiveRate>,
    pub seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub checkpoints: Vec<TrainCheckpoint>,
}

impl TrainReport {
    /// CSV with header `epoch,loss,train_pr,test_pr,seconds`; absent test
    /// rates and times are empty fields.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "epoch,loss,train_pr,test_pr,seconds")?;
        for c in &self.checkpoints {
            let test = c.test_rate.map(|r| r.fraction().to_string()).unwrap_or_default();
            let secs = c.seconds.map(|s| s.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{}",
                c.epoch,
                c.train_loss,
                c.train_rate.fraction(),
                test,
                secs
            )?;
        }
        Ok(())
    }

    pub fn last(&self) -> Option<&TrainCheckpoint> {
        self.checkpoints.last()
    }
}

/// Shuffled minibatch SGD. Each update uses the mean gradient over its
/// batch; the final batch of an epoch may be short.
pub fn train_sgd<D, T>(
    config: &ModelConfig,
    params: &Params,
    train: &D,
    test: Option<&T>,
    settings: &SgdSettings,
) -> Result<(Params, TrainReport), SgdError>
where
    D: LabeledData + ?Sized,
    T: LabeledData + ?Sized,
{
    settings.validate()?;
    if train.is_empty() {
        return Err(NetworkError::EmptyData.into());
    }
    let start = Instant::now();
    let mut params = params.clone();
    let mut report = TrainReport::default();
    let mut rng = ChaCha8Rng::seed_from_u64(settings.shuffle_seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=settings.epochs {
        order.shuffle(&mut rng);
        for (step, batch) in order.chunks(settings.batch_size).enumerate() {
            let view = Subset::new(train, batch);
            let eval = network::evaluate(config, &params, &view, true)?;
            let loss = eval.mean_loss();
            if !loss.is_finite() {
                return Err(SgdError::NonFiniteLoss {
                    loss,
                    epoch,
                    step,
                    snapshot: params.into_flat(),
                });
            }
            sgd_step(params.flat_mut(), &eval.mean_gradient(), settings.learning_rate);
        }
        let last = epoch == settings.epochs;
        let need_eval = last || epoch % settings.report_every == 0 || settings.target_rate.is_some();
        if !need_eval {
            continue;
        }
        let eval = network::evaluate(config, &params, train, false)?;
        let train_rate = eval.positive_rate();
        let reached = settings.target_rate.is_some_and(|t| train_rate.fraction() >= t);
        if last || reached || epoch % settings.report_every == 0 {
            let test_rate = match test {
                Some(t) => Some(network::positive_rate(config, &params, t)?),
                None => None,
            };
            let loss = eval.mean_loss();
            if !loss.is_finite() {
                return Err(SgdError::NonFiniteLoss {
                    loss,
                    epoch,
                    step: usize::MAX,
                    snapshot: params.into_flat(),
                });
            }
            log::info!("epoch {epoch}: loss {loss:.6}, train PR {train_rate}");
            report.checkpoints.push(TrainCheckpoint {
                epoch,
                train_loss: loss,
                train_rate,
                test_rate,
                seconds: settings.record_time.then(|| start.elapsed().as_secs_f64()),
            });
        }
        if reached {
            break;
        }
    }
    Ok((params, report))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdSettings {
    pub learning_rate: f64,
    /// Maximum number of update steps.
    pub budget: usize,
    /// Once every sample is classified correctly, stop when the first-order
    /// loss decrease of the next step, `alpha * |grad|^2`, falls below this.
    pub tolerance: f64,
}

impl Default for GdSettings {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            budget: 200,
            tolerance: 1e-6,
        }
    }
}

/// Loss, gradient and positive rate at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub loss: f64,
    pub gradient: Vec<f64>,
    pub rate: PositiveRate,
}

/// Anything gradient descent can run on.
pub trait Objective {
    fn probe(&self, point: &[f64]) -> Result<Probe, SgdError>;
}

/// Mean loss of a network over a fixed dataset.
pub struct NetworkObjective<'a, D: ?Sized> {
    pub config: &'a ModelConfig,
    pub data: &'a D,
}

impl<D: LabeledData + ?Sized> Objective for NetworkObjective<'_, D> {
    fn probe(&self, point: &[f64]) -> Result<Probe, SgdError> {
        let params = Params::from_flat(self.config, point.to_vec())?;
        let eval = network::evaluate(self.config, &params, self.data, true)?;
        Ok(Probe {
            loss: eval.mean_loss(),
            gradient: eval.mean_gradient(),
            rate: eval.positive_rate(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Descent {
    pub point: Vec<f64>,
    /// Update steps taken to reach `point`.
    pub iterations: usize,
    pub loss: f64,
    pub rate: PositiveRate,
    /// Stopped by the tolerance rule rather than the budget.
    pub converged: bool,
}

/// Up to `budget` steps from `start`. If the final point is not perfectly
/// classified but an earlier one was, the latest perfect point is returned.
pub fn gradient_descent<O: Objective + ?Sized>(
    objective: &O,
    start: &[f64],
    settings: &GdSettings,
) -> Result<Descent, SgdError> {
    if settings.budget == 0 {
        return Err(SgdError::InvalidSettings("descent budget must be at least 1".into()));
    }
    if !(settings.learning_rate > 0.0 && settings.learning_rate.is_finite()) {
        return Err(SgdError::InvalidSettings(format!(
            "learning rate must be positive, got {}",
            settings.learning_rate
        )));
    }
    let mut point = start.to_vec();
    let mut last_perfect: Option<Descent> = None;
    for k in 0..=settings.budget {
        let probe = objective.probe(&point)?;
        if !probe.loss.is_finite() {
            return Err(SgdError::NonFiniteLoss {
                loss: probe.loss,
                epoch: 0,
                step: k,
                snapshot: point,
            });
        }
        let predicted_decrease = settings.learning_rate * probe.gradient.iter().map(|g| g * g).sum::<f64>();
        if probe.rate.is_perfect() {
            let converged = predicted_decrease < settings.tolerance;
            let here = Descent {
                point: point.clone(),
                iterations: k,
                loss: probe.loss,
                rate: probe.rate,
                converged,
            };
            if converged || k == settings.budget {
                return Ok(here);
            }
            last_perfect = Some(here);
        } else if k == settings.budget {
            return Ok(last_perfect.unwrap_or(Descent {
                point,
                iterations: k,
                loss: probe.loss,
                rate: probe.rate,
                converged: false,
            }));
        }
        sgd_step(&mut point, &probe.gradient, settings.learning_rate);
    }
    unreachable!("loop returns at k == budget")
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdOutcome {
    pub params: Params,
    pub iterations: usize,
    pub loss: f64,
    pub rate: PositiveRate,
    pub converged: bool,
}

/// Full-batch gradient descent on the mean loss over `data`.
pub fn full_batch_gd<D: LabeledData + ?Sized>(
    config: &ModelConfig,
    params: &Params,
    data: &D,
    settings: &GdSettings,
) -> Result<GdOutcome, SgdError> {
    let objective = NetworkObjective { config, data };
    let d = gradient_descent(&objective, params.flat(), settings)?;
    Ok(GdOutcome {
        params: Params::from_flat(config, d.point)?,
        iterations: d.iterations,
        loss: d.loss,
        rate: d.rate,
        converged: d.converged,
    })
}
