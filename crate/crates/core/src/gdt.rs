//! Gradient-descent tunneling: continuation of a perfectly classifying
//! parameter point along the data homotopy from the partner data
//! (`lambda = 0`) to the true data (`lambda = 1`).
//!
//! Each step advances `lambda` by `a` and re-descends on the hybrid data
//! from the last accepted parameters. A step is accepted only if every
//! hybrid sample ends up classified correctly. A rejected step leaves the
//! state untouched and retries from it with `a` multiplied by the backtrack
//! factor; a run of accepted steps multiplies `a` by the growth factor.

use std::io::Write;

use thiserror::Error;

use crate::data::{
    build_partner_plan, DataError, Dataset, HybridDataset, LabeledData, PartnerPlan, PartnerPolicy, Sample, SplitResult,
};
use crate::network::{self, ModelConfig, NetworkError, Params, PositiveRate};
use crate::sgd::{full_batch_gd, GdOutcome, GdSettings, SgdError};

#[derive(Debug, Error)]
pub enum GdtError {
    #[error("starting parameters misclassify {} sample(s) at lambda = 0: {failing:?}", failing.len())]
    NotPerfectAtStart { failing: Vec<usize> },
    #[error("old parameters misclassify {} old sample(s): {failing:?}", failing.len())]
    OldDataNotLearned { failing: Vec<usize> },
    #[error("invalid continuation settings: {0}")]
    InvalidSettings(String),
    #[error("partner plan does not match the split")]
    PlanMismatch,
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationSettings {
    /// First homotopy step `a0`.
    pub initial_step: f64,
    /// Multiplier applied to `a` after a rejected step, in `(0, 1)`.
    pub backtrack_factor: f64,
    /// Multiplier applied to `a` after `growth_after` consecutive accepts.
    pub growth_factor: f64,
    pub growth_after: usize,
    /// Abort once `a` falls below this.
    pub min_step: f64,
    pub descent: GdSettings,
    /// Hard cap on attempted steps.
    pub max_attempts: usize,
}

impl Default for ContinuationSettings {
    fn default() -> Self {
        Self {
            initial_step: 0.1,
            backtrack_factor: 0.5,
            growth_factor: 2.0,
            growth_after: 2,
            min_step: 1e-6,
            descent: GdSettings {
                learning_rate: 1.0,
                budget: 200,
                tolerance: 1e-5,
            },
            max_attempts: 100_000,
        }
    }
}

impl ContinuationSettings {
    // negated comparisons also reject NaN
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), GdtError> {
        let bad = |m: String| Err(GdtError::InvalidSettings(m));
        if !(self.initial_step > 0.0) {
            return bad(format!("initial step must be positive, got {}", self.initial_step));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return bad(format!(
                "backtrack factor must lie in (0, 1), got {}",
                self.backtrack_factor
            ));
        }
        if !(self.growth_factor > 1.0) {
            return bad(format!("growth factor must exceed 1, got {}", self.growth_factor));
        }
        if self.growth_after == 0 {
            return bad("growth_after must be at least 1".into());
        }
        if !(self.min_step > 0.0) {
            return bad(format!("minimum step must be positive, got {}", self.min_step));
        }
        if self.descent.budget == 0 {
            return bad("descent budget must be at least 1".into());
        }
        if !(self.descent.learning_rate > 0.0) {
            return bad("descent learning rate must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Accept,
    Backtrack,
    Grow,
    Finish,
    Abort,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Accept => "accept",
            EventKind::Backtrack => "backtrack",
            EventKind::Grow => "grow",
            EventKind::Finish => "finish",
            EventKind::Abort => "abort",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    pub kind: EventKind,
    /// `lambda` attempted (accept, backtrack) or current (grow, finish, abort).
    pub lambda: f64,
    /// Step size `a` in effect for this event; for grow, the new size.
    pub step: f64,
    pub iterations: usize,
    pub rate: PositiveRate,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

impl Trace {
    fn push(&mut self, event: TraceEvent) {
        log::debug!(
            "{} lambda={} step={} iters={} pr={} loss={}",
            event.kind.as_str(),
            event.lambda,
            event.step,
            event.iterations,
            event.rate,
            event.loss
        );
        self.events.push(event);
    }

    pub fn accepts(&self) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter().filter(|e| e.kind == EventKind::Accept)
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    /// Total descent iterations over all attempts.
    pub fn descent_iterations(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::Accept | EventKind::Backtrack))
            .map(|e| e.iterations)
            .sum()
    }

    /// CSV with header
    /// `event,lambda,step,iterations,pr_numerator,pr_denominator,loss`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "event,lambda,step,iterations,pr_numerator,pr_denominator,loss")?;
        for e in &self.events {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                e.kind.as_str(),
                e.lambda,
                e.step,
                e.iterations,
                e.rate.correct,
                e.rate.total,
                e.loss
            )?;
        }
        Ok(())
    }
}

/// Last accepted point on the path.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationState {
    pub lambda: f64,
    pub step: f64,
    pub params: Params,
    pub consecutive_accepts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AbortReason {
    StepBelowMinimum {
        step: f64,
    },
    AttemptCap {
        attempts: usize,
    },
    /// The accepted `lambda = 1` parameters do not classify the true data
    /// perfectly; only possible if hybrid and data disagree.
    EndpointMismatch,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Finished,
    Aborted(AbortReason),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationOutcome {
    pub status: Status,
    /// Parameters of the last accepted state.
    pub params: Params,
    /// `lambda` of the last accepted state.
    pub lambda: f64,
    pub trace: Trace,
    /// Positive rate on the true data at the last accepted state.
    pub final_rate: PositiveRate,
}

impl ContinuationOutcome {
    pub fn is_finished(&self) -> bool {
        self.status == Status::Finished
    }
}

/// Re-descends on a hybrid dataset. The default runs full-batch gradient
/// descent; tests substitute stubs.
pub trait Corrector {
    fn correct(&self, config: &ModelConfig, params: &Params, data: &Dataset) -> Result<GdOutcome, SgdError>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCorrector(pub GdSettings);

impl Corrector for GradientCorrector {
    fn correct(&self, config: &ModelConfig, params: &Params, data: &Dataset) -> Result<GdOutcome, SgdError> {
        full_batch_gd(config, params, data, &self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    Accepted(GdOutcome),
    Rejected {
        rate: PositiveRate,
        loss: f64,
        iterations: usize,
        /// Set when the descent itself failed (e.g. non-finite loss).
        diagnostic: Option<String>,
    },
}

/// One continuation attempt from `state` to `target`. Never mutates
/// `state`; on acceptance the corrected parameters are returned.
pub fn attempt_step<C: Corrector + ?Sized>(
    config: &ModelConfig,
    base: &Dataset,
    plan: &PartnerPlan,
    state: &ContinuationState,
    target: f64,
    corrector: &C,
) -> Result<StepOutcome, GdtError> {
    let hybrid = HybridDataset::new(base, plan, target)?.materialize();
    if target == state.lambda {
        let eval = network::evaluate(config, &state.params, &hybrid, false)?;
        if eval.positive_rate().is_perfect() {
            return Ok(StepOutcome::Accepted(GdOutcome {
                params: state.params.clone(),
                iterations: 0,
                loss: eval.mean_loss(),
                rate: eval.positive_rate(),
                converged: true,
            }));
        }
    }
    match corrector.correct(config, &state.params, &hybrid) {
        Ok(out) if out.rate.is_perfect() => Ok(StepOutcome::Accepted(out)),
        Ok(out) => Ok(StepOutcome::Rejected {
            rate: out.rate,
            loss: out.loss,
            iterations: out.iterations,
            diagnostic: None,
        }),
        Err(SgdError::Network(e)) => Err(e.into()),
        Err(e) => Ok(StepOutcome::Rejected {
            rate: PositiveRate {
                correct: 0,
                total: hybrid.len(),
            },
            loss: f64::NAN,
            iterations: 0,
            diagnostic: Some(e.to_string()),
        }),
    }
}

/// Runs the continuation with full-batch gradient descent as corrector.
pub fn run_continuation(
    config: &ModelConfig,
    params0: &Params,
    data: &Dataset,
    split: &SplitResult,
    plan: &PartnerPlan,
    settings: &ContinuationSettings,
) -> Result<ContinuationOutcome, GdtError> {
    run_continuation_with(
        config,
        params0,
        data,
        split,
        plan,
        settings,
        &GradientCorrector(settings.descent),
        &mut |_| {},
    )
}

/// General form: any corrector, and `on_accept` called with every newly
/// accepted state (e.g. to write periodic checkpoints).
#[allow(clippy::too_many_arguments)]
pub fn run_continuation_with<C: Corrector + ?Sized>(
    config: &ModelConfig,
    params0: &Params,
    data: &Dataset,
    split: &SplitResult,
    plan: &PartnerPlan,
    settings: &ContinuationSettings,
    corrector: &C,
    on_accept: &mut dyn FnMut(&ContinuationState),
) -> Result<ContinuationOutcome, GdtError> {
    settings.validate()?;
    if split.len() != data.len()
        || plan.len() != split.untrained.len()
        || split.untrained.iter().any(|&u| plan.partner(u).is_none())
    {
        return Err(GdtError::PlanMismatch);
    }

    let start = HybridDataset::new(data, plan, 0.0)?;
    let flags = network::correctness(config, params0, &start)?;
    let failing: Vec<usize> = flags
        .iter()
        .enumerate()
        .filter(|(_, ok)| !**ok)
        .map(|(i, _)| i)
        .collect();
    if !failing.is_empty() {
        return Err(GdtError::NotPerfectAtStart { failing });
    }

    let mut trace = Trace::default();
    let mut state = ContinuationState {
        lambda: 0.0,
        step: settings.initial_step,
        params: params0.clone(),
        consecutive_accepts: 0,
    };

    if plan.is_empty() {
        // hybrid equals the true data for every lambda
        let eval = network::evaluate(config, params0, data, false)?;
        state.lambda = 1.0;
        trace.push(TraceEvent {
            kind: EventKind::Accept,
            lambda: 1.0,
            step: 1.0,
            iterations: 0,
            rate: eval.positive_rate(),
            loss: eval.mean_loss(),
        });
        on_accept(&state);
        return finish(config, data, state, trace);
    }

    let eval0 = network::evaluate(config, params0, &start, false)?;
    trace.push(TraceEvent {
        kind: EventKind::Accept,
        lambda: 0.0,
        step: 0.0,
        iterations: 0,
        rate: eval0.positive_rate(),
        loss: eval0.mean_loss(),
    });
    on_accept(&state);

    let mut attempts = 0;
    loop {
        if attempts >= settings.max_attempts {
            return abort(config, data, state, trace, AbortReason::AttemptCap { attempts });
        }
        attempts += 1;

        if state.lambda + state.step >= 1.0 {
            state.step = 1.0 - state.lambda;
        }
        let target = if state.lambda + state.step >= 1.0 {
            1.0
        } else {
            state.lambda + state.step
        };

        match attempt_step(config, data, plan, &state, target, corrector)? {
            StepOutcome::Accepted(out) => {
                trace.push(TraceEvent {
                    kind: EventKind::Accept,
                    lambda: target,
                    step: state.step,
                    iterations: out.iterations,
                    rate: out.rate,
                    loss: out.loss,
                });
                state.lambda = target;
                state.params = out.params;
                state.consecutive_accepts += 1;
                on_accept(&state);
                if state.lambda == 1.0 {
                    return finish(config, data, state, trace);
                }
                if state.consecutive_accepts >= settings.growth_after {
                    state.consecutive_accepts = 0;
                    state.step *= settings.growth_factor;
                    trace.push(TraceEvent {
                        kind: EventKind::Grow,
                        lambda: state.lambda,
                        step: state.step,
                        iterations: 0,
                        rate: out.rate,
                        loss: out.loss,
                    });
                }
            }
            StepOutcome::Rejected {
                rate,
                loss,
                iterations,
                diagnostic,
            } => {
                if let Some(msg) = diagnostic {
                    log::warn!("attempt at lambda {target} failed: {msg}");
                }
                trace.push(TraceEvent {
                    kind: EventKind::Backtrack,
                    lambda: target,
                    step: state.step,
                    iterations,
                    rate,
                    loss,
                });
                state.consecutive_accepts = 0;
                state.step *= settings.backtrack_factor;
                if state.step < settings.min_step {
                    let step = state.step;
                    return abort(config, data, state, trace, AbortReason::StepBelowMinimum { step });
                }
            }
        }
    }
}

fn finish(
    config: &ModelConfig,
    data: &Dataset,
    state: ContinuationState,
    mut trace: Trace,
) -> Result<ContinuationOutcome, GdtError> {
    let eval = network::evaluate(config, &state.params, data, false)?;
    let rate = eval.positive_rate();
    if !rate.is_perfect() {
        return abort(config, data, state, trace, AbortReason::EndpointMismatch);
    }
    trace.push(TraceEvent {
        kind: EventKind::Finish,
        lambda: 1.0,
        step: state.step,
        iterations: 0,
        rate,
        loss: eval.mean_loss(),
    });
    Ok(ContinuationOutcome {
        status: Status::Finished,
        params: state.params,
        lambda: state.lambda,
        trace,
        final_rate: rate,
    })
}

fn abort(
    config: &ModelConfig,
    data: &Dataset,
    state: ContinuationState,
    mut trace: Trace,
    reason: AbortReason,
) -> Result<ContinuationOutcome, GdtError> {
    let eval = network::evaluate(config, &state.params, data, false)?;
    log::warn!("continuation aborted at lambda {}: {reason:?}", state.lambda);
    trace.push(TraceEvent {
        kind: EventKind::Abort,
        lambda: state.lambda,
        step: state.step,
        iterations: 0,
        rate: eval.positive_rate(),
        loss: eval.mean_loss(),
    });
    Ok(ContinuationOutcome {
        status: Status::Aborted(reason),
        params: state.params,
        lambda: state.lambda,
        trace,
        final_rate: eval.positive_rate(),
    })
}

/// Learns `new_samples` while keeping every sample of `old_data` correct:
/// old data plays the trained set, new data the untrained set, and the
/// continuation runs on their concatenation (old first).
#[allow(clippy::too_many_arguments)]
pub fn cumulative_train(
    config: &ModelConfig,
    params_old: &Params,
    old_data: &Dataset,
    new_samples: &[Sample],
    settings: &ContinuationSettings,
    seed: u64,
    policy: PartnerPolicy,
) -> Result<(ContinuationOutcome, Dataset), GdtError> {
    let flags = network::correctness(config, params_old, old_data)?;
    let failing: Vec<usize> = flags
        .iter()
        .enumerate()
        .filter(|(_, ok)| !**ok)
        .map(|(i, _)| i)
        .collect();
    if !failing.is_empty() {
        return Err(GdtError::OldDataNotLearned { failing });
    }
    if new_samples.is_empty() {
        let eval = network::evaluate(config, params_old, old_data, false)?;
        let mut trace = Trace::default();
        trace.push(TraceEvent {
            kind: EventKind::Finish,
            lambda: 1.0,
            step: 0.0,
            iterations: 0,
            rate: eval.positive_rate(),
            loss: eval.mean_loss(),
        });
        let outcome = ContinuationOutcome {
            status: Status::Finished,
            params: params_old.clone(),
            lambda: 1.0,
            trace,
            final_rate: eval.positive_rate(),
        };
        return Ok((outcome, old_data.clone()));
    }
    let new_data = Dataset::from_samples(new_samples, old_data.class_count())?;
    let combined = old_data.concat(&new_data)?;
    let n_old = old_data.len();
    let split = SplitResult::from_parts((0..n_old).collect(), (n_old..combined.len()).collect(), combined.len())?;
    let plan = build_partner_plan(&split, &combined, seed, policy)?;
    let outcome = run_continuation(config, params_old, &combined, &split, &plan, settings)?;
    Ok((outcome, combined))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn settings_validation() {
        assert!(ContinuationSettings::default().validate().is_ok());
        for bad in [
            ContinuationSettings {
                backtrack_factor: 1.0,
                ..Default::default()
            },
            ContinuationSettings {
                growth_factor: 1.0,
                ..Default::default()
            },
            ContinuationSettings {
                min_step: 0.0,
                ..Default::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn trace_csv_layout() {
        let mut t = Trace::default();
        t.push(TraceEvent {
            kind: EventKind::Backtrack,
            lambda: 0.5,
            step: 0.5,
            iterations: 3,
            rate: PositiveRate { correct: 9, total: 10 },
            loss: 0.25,
        });
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "event,lambda,step,iterations,pr_numerator,pr_denominator,loss\n\
             backtrack,0.5,0.5,3,9,10,0.25\n"
        );
    }
}
