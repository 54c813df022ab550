//! Verification oracles and figure-data exports.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::data::{Dataset, LabeledData};
use crate::network::{
    self, init_params, switch_ode_rhs, switch_rho, switch_sigma, Activation, ModelConfig, NetworkError, Params,
};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("no samples to check")]
    EmptyData,
    #[error("gradient check needs a net no larger than 5-5-5, got {0:?}")]
    NetTooLarge(Vec<usize>),
    #[error("expected three distinct class ids, got {0:?}")]
    InvalidClasses(Vec<usize>),
    #[error("invalid sweep grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Central-difference step used by [`gradcheck`].
pub const FD_STEP: f64 = 1e-5;
/// ReLU pre-activations are kept at least this far from the kink.
pub const RELU_MARGIN: f64 = 1e-3;
/// Relative errors use `max(|analytic|, |numeric|, REL_FLOOR)` as the
/// denominator, so coordinates whose true gradient vanishes are compared
/// absolutely.
pub const REL_FLOOR: f64 = 1e-4;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Error statistics for one weight or bias block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockError {
    pub layer: usize,
    pub is_bias: bool,
    pub max_rel: f64,
    pub mean_rel: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub blocks: Vec<BlockError>,
    pub max_rel: f64,
    pub mean_rel: f64,
    pub samples: usize,
    pub parameters: usize,
}

impl GradcheckReport {
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "samples: {}", self.samples)?;
        writeln!(out, "parameters: {}", self.parameters)?;
        writeln!(out, "max_rel_err: {:e}", self.max_rel)?;
        writeln!(out, "mean_rel_err: {:e}", self.mean_rel)?;
        for b in &self.blocks {
            let kind = if b.is_bias { "b" } else { "w" };
            writeln!(out, "layer{}.{kind}.max_rel_err: {:e}", b.layer, b.max_rel)?;
            writeln!(out, "layer{}.{kind}.mean_rel_err: {:e}", b.layer, b.mean_rel)?;
        }
        Ok(())
    }
}

/// Random problem for [`gradcheck`]: parameters from `init_params` and
/// uniform inputs and labels. For ReLU nets the draw is repeated until
/// every hidden pre-activation is at least [`RELU_MARGIN`] from zero.
pub fn gradcheck_problem(config: &ModelConfig, seed: u64, samples: usize) -> Result<(Params, Dataset), AnalysisError> {
    if samples == 0 {
        return Err(AnalysisError::EmptyData);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let params = init_params(config, rng.random());
        let d = config.input_dim();
        let inputs: Vec<f64> = (0..samples * d).map(|_| rng.random::<f64>()).collect();
        let labels: Vec<usize> = (0..samples)
            .map(|_| rng.random_range(0..config.class_count()))
            .collect();
        let data = Dataset::new(inputs, labels, d, config.class_count()).expect("generated data is valid");
        if config.activation() != Activation::Relu || clear_of_kinks(config, &params, &data)? {
            return Ok((params, data));
        }
    }
}

fn clear_of_kinks(config: &ModelConfig, params: &Params, data: &Dataset) -> Result<bool, NetworkError> {
    for i in 0..data.len() {
        let trace = network::forward(config, params, data.row(i))?;
        let hidden = &trace.pre_activations[..trace.pre_activations.len() - 1];
        if hidden.iter().flatten().any(|z| z.abs() < RELU_MARGIN) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Backprop gradient against central differences of the loss, on a random
/// net of at most 5-5-5 with `samples` (at most 10) random samples.
pub fn gradcheck(config: &ModelConfig, seed: u64, samples: usize) -> Result<GradcheckReport, AnalysisError> {
    if config.layer_sizes().iter().any(|&n| n > 5) {
        return Err(AnalysisError::NetTooLarge(config.layer_sizes().to_vec()));
    }
    if samples > 10 {
        return Err(AnalysisError::InvalidGrid(format!("at most 10 samples, got {samples}")));
    }
    let (params, data) = gradcheck_problem(config, seed, samples)?;
    let analytic = network::grad(config, &params, &data)?;
    let mut rel = Vec::with_capacity(params.len());
    let mut probe = params.clone();
    for (k, &a) in analytic.iter().enumerate() {
        let base = probe.flat()[k];
        probe.flat_mut()[k] = base + FD_STEP;
        let up = network::loss(config, &probe, &data)?;
        probe.flat_mut()[k] = base - FD_STEP;
        let down = network::loss(config, &probe, &data)?;
        probe.flat_mut()[k] = base;
        rel.push(relative_error(a, (up - down) / (2.0 * FD_STEP)));
    }

    let mut blocks = Vec::new();
    for l in 0..params.layer_count() {
        let start = params.layer_offset(l);
        let n_w = params.weights(l).len();
        let n_b = params.biases(l).len();
        for (is_bias, range) in [(false, start..start + n_w), (true, start + n_w..start + n_w + n_b)] {
            let slice = &rel[range];
            blocks.push(BlockError {
                layer: l,
                is_bias,
                max_rel: slice.iter().copied().fold(0.0, f64::max),
                mean_rel: slice.iter().sum::<f64>() / slice.len() as f64,
            });
        }
    }
    Ok(GradcheckReport {
        blocks,
        max_rel: rel.iter().copied().fold(0.0, f64::max),
        mean_rel: rel.iter().sum::<f64>() / rel.len() as f64,
        samples,
        parameters: params.len(),
    })
}

/// Evenly spaced points on `[start, end]`, both strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepGrid {
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            start: 0.1,
            end: 20.0,
            points: 400,
        }
    }
}

impl SweepGrid {
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.points;
        (0..n).map(move |k| {
            if n == 1 {
                self.start
            } else {
                self.start + (self.end - self.start) * k as f64 / (n - 1) as f64
            }
        })
    }
}

/// Central-difference step for the ODE checks.
pub const ODE_STEP: f64 = 1e-6;
pub const ODE_TOLERANCE: f64 = 1e-6;
pub const INVERSE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub points: usize,
    /// `max |d sigma/dx - sqrt(sigma)(1 - sigma)|`.
    pub sigma_ode_abs: f64,
    /// Same for rho, divided by `max(|d rho/dx|, 1)`: relative where rho
    /// is steep near 0, absolute where it flattens towards 1.
    pub rho_ode_rel: f64,
    /// `max |rho(sigma(x)) - x| / x`.
    pub composition_rel: f64,
    /// `max |sigma(x) rho(x) - 1|`.
    pub reciprocal_abs: f64,
    pub sigma_at_zero: f64,
}

impl SweepReport {
    pub fn checks(&self) -> Vec<(&'static str, f64, f64, bool)> {
        let row = |name, value: f64, tol: f64| (name, value, tol, value < tol);
        vec![
            row("sigma_ode_residual", self.sigma_ode_abs, ODE_TOLERANCE),
            row("rho_ode_relative_residual", self.rho_ode_rel, ODE_TOLERANCE),
            row(
                "rho_of_sigma_relative_residual",
                self.composition_rel,
                INVERSE_TOLERANCE,
            ),
            row("sigma_times_rho_residual", self.reciprocal_abs, INVERSE_TOLERANCE),
            ("sigma_at_zero", self.sigma_at_zero, 0.0, self.sigma_at_zero == 0.0),
        ]
    }

    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "points: {}", self.points)?;
        for (name, value, tol, pass) in self.checks() {
            let verdict = if pass { "pass" } else { "FAIL" };
            writeln!(out, "{name}: {value:e} (tolerance {tol:e}) {verdict}")?;
        }
        Ok(())
    }
}

/// Checks the switch function identities at every grid point; the grid
/// must stay strictly positive (`x = 0` is the switching point and is not
/// evaluated).
pub fn activation_property_sweep(grid: &SweepGrid) -> Result<SweepReport, AnalysisError> {
    if !(grid.start > 0.0 && grid.end >= grid.start && grid.end.is_finite()) || grid.points == 0 {
        return Err(AnalysisError::InvalidGrid(format!(
            "need 0 < start <= end and at least one point, got {grid:?}"
        )));
    }
    let h = ODE_STEP;
    let mut report = SweepReport {
        points: grid.points,
        sigma_ode_abs: 0.0,
        rho_ode_rel: 0.0,
        composition_rel: 0.0,
        reciprocal_abs: 0.0,
        sigma_at_zero: switch_sigma(0.0),
    };
    let rho = |x: f64| switch_rho(x).expect("grid is positive");
    for x in grid.values() {
        let y = switch_sigma(x);
        let dy = (switch_sigma(x + h) - switch_sigma(x - h)) / (2.0 * h);
        report.sigma_ode_abs = report.sigma_ode_abs.max((dy - switch_ode_rhs(y)).abs());

        let r = rho(x);
        let dr = (rho(x + h) - rho(x - h)) / (2.0 * h);
        let rhs = switch_ode_rhs(r);
        report.rho_ode_rel = report.rho_ode_rel.max((dr - rhs).abs() / rhs.abs().max(1.0));

        let back = if y > 0.0 { rho(y) } else { f64::INFINITY };
        report.composition_rel = report.composition_rel.max((back - x).abs() / x);
        report.reciprocal_abs = report.reciprocal_abs.max((y * r - 1.0).abs());
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterExport {
    pub rows: usize,
    /// Requested classes with no sample in the data.
    pub missing: Vec<usize>,
}

/// Writes `p_a,p_b,p_c,label` for every sample whose label is one of
/// `classes`: the model's output probabilities for the three classes in the
/// given order, so the one-hot vertices `[1,0,0]`, `[0,1,0]`, `[0,0,1]`
/// stand for `classes[0]`, `classes[1]`, `classes[2]`.
pub fn export_cluster_projection<D: LabeledData + ?Sized, W: Write>(
    config: &ModelConfig,
    params: &Params,
    data: &D,
    classes: &[usize],
    mut out: W,
) -> Result<ClusterExport, AnalysisError> {
    let distinct =
        classes.len() == 3 && classes[0] != classes[1] && classes[0] != classes[2] && classes[1] != classes[2];
    if !distinct || classes.iter().any(|&c| c >= config.class_count()) {
        return Err(AnalysisError::InvalidClasses(classes.to_vec()));
    }
    writeln!(out, "p_a,p_b,p_c,label")?;
    let mut seen = [false; 3];
    let mut rows = 0;
    for i in 0..data.len() {
        let label = data.label(i);
        let Some(slot) = classes.iter().position(|&c| c == label) else {
            continue;
        };
        seen[slot] = true;
        let trace = network::forward(config, params, &data.input(i))?;
        let p = &trace.probabilities;
        writeln!(out, "{},{},{},{label}", p[classes[0]], p[classes[1]], p[classes[2]])?;
        rows += 1;
    }
    let missing: Vec<usize> = classes.iter().zip(seen).filter(|(_, s)| !s).map(|(&c, _)| c).collect();
    for c in &missing {
        log::warn!("class {c} has no samples in the data");
    }
    Ok(ClusterExport { rows, missing })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradcheck_rejects_empty_and_large() {
        let small = ModelConfig::new(vec![3, 3, 3], Activation::Switch).unwrap();
        assert!(matches!(gradcheck(&small, 0, 0), Err(AnalysisError::EmptyData)));
        let big = ModelConfig::new(vec![6, 3, 3], Activation::Switch).unwrap();
        assert!(matches!(gradcheck(&big, 0, 4), Err(AnalysisError::NetTooLarge(_))));
    }

    #[test]
    fn gradcheck_small_nets() {
        let switch = ModelConfig::new(vec![4, 5, 3], Activation::Switch).unwrap();
        assert!(gradcheck(&switch, 7, 6).unwrap().max_rel < 1e-6);
        let relu = ModelConfig::new(vec![4, 5, 3], Activation::Relu).unwrap();
        assert!(gradcheck(&relu, 7, 6).unwrap().max_rel < 1e-5);
    }

    #[test]
    fn sweep_rejects_nonpositive_grid() {
        let grid = SweepGrid {
            start: 0.0,
            end: 1.0,
            points: 3,
        };
        assert!(activation_property_sweep(&grid).is_err());
    }

    #[test]
    fn sweep_residuals() {
        let r = activation_property_sweep(&SweepGrid::default()).unwrap();
        assert!(r.sigma_ode_abs < ODE_TOLERANCE, "{r:?}");
        assert!(r.rho_ode_rel < ODE_TOLERANCE, "{r:?}");
        assert!(r.reciprocal_abs < INVERSE_TOLERANCE, "{r:?}");
        assert_eq!(r.sigma_at_zero, 0.0);
    }

    #[test]
    fn uniform_model_projects_to_the_center() {
        let config = ModelConfig::new(vec![2, 3, 10], Activation::Switch).unwrap();
        let params = Params::zeros(&config);
        let data = Dataset::new(vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6], vec![1, 5, 2], 2, 10).unwrap();
        let mut buf = Vec::new();
        let export = export_cluster_projection(&config, &params, &data, &[1, 2, 3], &mut buf).unwrap();
        assert_eq!(export.rows, 2);
        assert_eq!(export.missing, vec![3]);
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("p_a,p_b,p_c,label"));
        for line in lines {
            let v: Vec<f64> = line.split(',').map(|f| f.parse().unwrap()).collect();
            assert!(v[..3].iter().all(|p| (p - 0.1).abs() < 1e-15));
        }
    }

    #[test]
    fn cluster_export_needs_three_distinct_classes() {
        let config = ModelConfig::new(vec![1, 1, 4], Activation::Switch).unwrap();
        let params = Params::zeros(&config);
        let data = Dataset::new(vec![0.5], vec![0], 1, 4).unwrap();
        for bad in [&[0, 1][..], &[0, 1, 1], &[0, 1, 7]] {
            assert!(export_cluster_projection(&config, &params, &data, bad, Vec::new()).is_err());
        }
    }
}
