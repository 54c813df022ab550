//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Tolerances are the constants below.
//!
//!     cargo test -p errfree-verify --test acceptance

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use errfree::analysis::{self, export_cluster_projection};
use errfree::data::{
    self, idx, make_synthetic, Dataset, HybridDataset, LabeledData, PartnerPlan, PartnerPolicy, SplitResult,
    SyntheticSpec,
};
use errfree::gdt::{self, AbortReason, ContinuationOutcome, ContinuationSettings, Corrector, EventKind, Status, Trace};
use errfree::network::{self, init_params, param_count, switch_rho, switch_sigma, Activation, ModelConfig, Params};
use errfree::sgd::{self, GdOutcome, GdSettings, SgdError, SgdSettings};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PAPER_PARAM_COUNTS: [(usize, usize); 5] = [(100, 79510), (80, 63610), (60, 47710), (40, 31810), (20, 15910)];
const DESK_SAMPLES: usize = 2000;
const DESK_HIDDEN: usize = 20;
const DESK_SEED: u64 = 1;
const DESK_PRETRAIN_TARGET: f64 = 0.95;
const LAMBDA0_SEEDS: u64 = 24;
const GRAD_TRIALS: u64 = 120;
const GRAD_STEP: f64 = 1e-5;
const GRAD_FLOOR: f64 = 1e-4;
const GRAD_TOL_SWITCH: f64 = 1e-6;
const GRAD_TOL_RELU: f64 = 1e-5;
const ODE_STEP: f64 = 1e-6;
const ODE_TOL: f64 = 1e-6;
const INVERSE_TOL: f64 = 1e-9;
const GRID_POINTS: usize = 2000;
const HOMOTOPY_TRIALS: u64 = 200;
const CLUSTER_CLASSES: [usize; 3] = [3, 5, 8];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

// independent reference forward pass and loss

fn ref_sigma(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        let t = (x / 2.0).tanh();
        t * t
    }
}

fn ref_logits(config: &ModelConfig, params: &Params, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let sizes = config.layer_sizes();
    let flat = params.flat();
    let mut offset = 0;
    let mut a = x.to_vec();
    let mut hidden_pre = Vec::new();
    for l in 0..sizes.len() - 1 {
        let (n_in, n_out) = (sizes[l], sizes[l + 1]);
        let w = &flat[offset..offset + n_in * n_out];
        let b = &flat[offset + n_in * n_out..offset + n_in * n_out + n_out];
        offset += n_in * n_out + n_out;
        let mut z = vec![0.0; n_out];
        for j in 0..n_out {
            let mut s = b[j];
            for i in 0..n_in {
                s += w[j * n_in + i] * a[i];
            }
            z[j] = s;
        }
        if l + 2 == sizes.len() {
            return (z, hidden_pre);
        }
        a = z
            .iter()
            .map(|&v| match config.activation() {
                Activation::Switch => ref_sigma(v),
                Activation::Relu => v.max(0.0),
            })
            .collect();
        hidden_pre.push(z);
    }
    unreachable!()
}

fn ref_argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

fn ref_loss(config: &ModelConfig, params: &Params, xs: &[Vec<f64>], ys: &[usize]) -> f64 {
    let s = config.softmax_scale();
    let mut total = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        let (z, _) = ref_logits(config, params, x);
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let denom: f64 = z.iter().map(|v| ((v - m) / s).exp()).sum();
        let p = ((z[y] - m) / s).exp() / denom;
        total -= p.max(1e-300).ln();
    }
    total / xs.len() as f64
}

// criteria

fn c1_param_counts() -> Verdict {
    let mut bad = Vec::new();
    for (n, expected) in PAPER_PARAM_COUNTS {
        let got = param_count(&[784, n, 10]);
        let cfg = ModelConfig::new(vec![784, n, 10], Activation::Switch)
            .unwrap()
            .param_count();
        if got != expected || cfg != expected {
            bad.push(format!("n={n}: {got} vs {expected}"));
        }
    }
    if bad.is_empty() {
        verdict(true, "79510, 63610, 47710, 31810, 15910 exact")
    } else {
        verdict(false, bad.join("; "))
    }
}

struct DeskRun {
    config: ModelConfig,
    data: Dataset,
    pretrain_correct: usize,
    split: SplitResult,
    plan: PartnerPlan,
    pretrained: Params,
    outcome: ContinuationOutcome,
    seconds: f64,
}

fn desk_run() -> Result<DeskRun, String> {
    let dir = workspace_root().join("data/mnist");
    let full = idx::load_idx_dataset(
        dir.join("train-images-idx3-ubyte.gz"),
        dir.join("train-labels-idx1-ubyte.gz"),
        10,
    )
    .map_err(|e| e.to_string())?;
    let data = full.seeded_subset(DESK_SAMPLES, DESK_SEED).map_err(|e| e.to_string())?;
    let config = ModelConfig::new(vec![784, DESK_HIDDEN, 10], Activation::Switch).unwrap();
    assert_eq!(config.init_range(), 0.5);
    assert_eq!(config.softmax_scale(), 1.0);
    let t = Instant::now();
    let mut s = SgdSettings::for_activation(Activation::Switch);
    s.epochs = 200;
    s.target_rate = Some(DESK_PRETRAIN_TARGET);
    s.shuffle_seed = DESK_SEED + 1;
    let (pretrained, _) = sgd::train_sgd(&config, &init_params(&config, DESK_SEED), &data, None::<&Dataset>, &s)
        .map_err(|e| e.to_string())?;
    let pretrain_correct = network::positive_rate(&config, &pretrained, &data).unwrap().correct;
    let split = data::split_by_correctness(&config, &pretrained, &data).unwrap();
    let plan =
        data::build_partner_plan(&split, &data, DESK_SEED, PartnerPolicy::AllowRepeat).map_err(|e| e.to_string())?;
    let outcome = gdt::run_continuation(
        &config,
        &pretrained,
        &data,
        &split,
        &plan,
        &ContinuationSettings::default(),
    )
    .map_err(|e| e.to_string())?;
    Ok(DeskRun {
        config,
        data,
        pretrain_correct,
        split,
        plan,
        pretrained,
        outcome,
        seconds: t.elapsed().as_secs_f64(),
    })
}

fn ref_rate(config: &ModelConfig, params: &Params, data: &Dataset) -> usize {
    (0..data.len())
        .filter(|&i| ref_argmax(&ref_logits(config, params, data.row(i)).0) == data.label(i))
        .count()
}

fn c2_desk(run: &Result<DeskRun, String>) -> Verdict {
    let run = match run {
        Ok(r) => r,
        Err(e) => return verdict(false, format!("run failed: {e}")),
    };
    let target = (DESK_PRETRAIN_TARGET * DESK_SAMPLES as f64).ceil() as usize;
    let correct = ref_rate(&run.config, &run.outcome.params, &run.data);
    let pass = run.pretrain_correct >= target
        && run.outcome.is_finished()
        && run.outcome.lambda == 1.0
        && correct == DESK_SAMPLES
        && run.outcome.final_rate.correct == DESK_SAMPLES;
    verdict(
        pass,
        format!(
            "pretrain {}/{DESK_SAMPLES}, {} untrained, {:?} at lambda {}, train PR {correct}/{DESK_SAMPLES}, {} accepts, {} backtracks, {:.0}s",
            run.pretrain_correct,
            run.split.untrained.len(),
            run.outcome.status,
            run.outcome.lambda,
            run.outcome.trace.count(EventKind::Accept),
            run.outcome.trace.count(EventKind::Backtrack),
            run.seconds
        ),
    )
}

fn blob_problem(seed: u64, epochs: usize) -> (ModelConfig, Params, Dataset) {
    let data = make_synthetic(&SyntheticSpec::new(3, 50, 0.1, seed)).unwrap();
    let config = ModelConfig::new(vec![2, 16, 3], Activation::Switch).unwrap();
    let mut s = SgdSettings::for_activation(Activation::Switch);
    s.epochs = epochs;
    s.shuffle_seed = seed;
    let (params, _) = sgd::train_sgd(&config, &init_params(&config, seed), &data, None::<&Dataset>, &s).unwrap();
    (config, params, data)
}

/// Reference check of the start of the homotopy: every trained sample and
/// every partner clone, built here from the plan, must be classified
/// correctly by the split-generating parameters.
fn start_is_perfect(config: &ModelConfig, params: &Params, data: &Dataset, plan: &PartnerPlan) -> bool {
    (0..data.len()).all(|i| {
        let x = plan.partner(i).map_or(data.row(i), |j| data.row(j));
        ref_argmax(&ref_logits(config, params, x).0) == data.label(i)
    })
}

fn c3_lambda0(desk: &Result<DeskRun, String>) -> Verdict {
    let mut checked = 0;
    let mut failed = Vec::new();
    for seed in 0..LAMBDA0_SEEDS {
        let (config, params, data) = blob_problem(seed, 50);
        let split = data::split_by_correctness(&config, &params, &data).unwrap();
        let Ok(plan) = data::build_partner_plan(&split, &data, seed, PartnerPolicy::AllowRepeat) else {
            continue;
        };
        checked += 1;
        let h0 = HybridDataset::new(&data, &plan, 0.0).unwrap();
        let rate = network::positive_rate(&config, &params, &h0).unwrap();
        if rate.correct != rate.total || !start_is_perfect(&config, &params, &data, &plan) {
            failed.push(seed);
        }
    }
    if let Ok(run) = desk {
        checked += 1;
        if !start_is_perfect(&run.config, &run.pretrained, &run.data, &run.plan) {
            failed.push(u64::MAX);
        }
    }
    verdict(
        failed.is_empty() && checked >= 20,
        format!("{checked} seeded split/plan pairs, failures {failed:?}"),
    )
}

struct Frozen;

impl Corrector for Frozen {
    fn correct(&self, config: &ModelConfig, params: &Params, data: &Dataset) -> Result<GdOutcome, SgdError> {
        let e = network::evaluate(config, params, data, false)?;
        Ok(GdOutcome {
            params: params.clone(),
            iterations: 0,
            loss: e.mean_loss(),
            rate: e.positive_rate(),
            converged: true,
        })
    }
}

fn c4_backtrack() -> Verdict {
    let (config, params, data) = blob_problem(1, 50);
    let split = data::split_by_correctness(&config, &params, &data).unwrap();
    let plan = data::build_partner_plan(&split, &data, 1, PartnerPolicy::AllowRepeat).unwrap();
    let forced = ContinuationSettings {
        initial_step: 1.0,
        min_step: 0.01,
        descent: GdSettings {
            learning_rate: 1e-3,
            budget: 1,
            tolerance: 1e-5,
        },
        ..Default::default()
    };
    let out = gdt::run_continuation(&config, &params, &data, &split, &plan, &forced).unwrap();
    let ev = &out.trace.events;
    let halved = ev.len() > 2
        && ev[1].kind == EventKind::Backtrack
        && ev[1].step == 1.0
        && ev[1].lambda == 1.0
        && ev[2].step == 0.5
        && ev[2].lambda == 0.5;

    let floor = 1e-3;
    let frozen = gdt::run_continuation_with(
        &config,
        &params,
        &data,
        &split,
        &plan,
        &ContinuationSettings {
            min_step: floor,
            ..Default::default()
        },
        &Frozen,
        &mut |_| {},
    )
    .unwrap();
    let aborted = matches!(frozen.status, Status::Aborted(AbortReason::StepBelowMinimum { step }) if step < floor);
    verdict(
        halved && aborted,
        format!(
            "rejected step 1 at lambda 1 then step {} at lambda {}; frozen stub: {:?} after {} events",
            ev.get(2).map_or(f64::NAN, |e| e.step),
            ev.get(2).map_or(f64::NAN, |e| e.lambda),
            frozen.status,
            frozen.trace.events.len()
        ),
    )
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(GRAD_FLOOR)
}

fn grad_trial(config: &ModelConfig, seed: u64, samples: usize) -> f64 {
    let (mut params, data) = analysis::gradcheck_problem(config, seed, samples).unwrap();
    let xs: Vec<Vec<f64>> = (0..data.len()).map(|i| data.row(i).to_vec()).collect();
    let ys = data.labels().to_vec();
    if config.activation() == Activation::Relu {
        for x in &xs {
            let (_, pre) = ref_logits(config, &params, x);
            assert!(pre.iter().flatten().all(|z| z.abs() >= analysis::RELU_MARGIN));
        }
    }
    let analytic = network::grad(config, &params, &data).unwrap();
    let mut worst: f64 = 0.0;
    for (k, &a) in analytic.iter().enumerate() {
        let base = params.flat()[k];
        params.flat_mut()[k] = base + GRAD_STEP;
        let up = ref_loss(config, &params, &xs, &ys);
        params.flat_mut()[k] = base - GRAD_STEP;
        let down = ref_loss(config, &params, &xs, &ys);
        params.flat_mut()[k] = base;
        worst = worst.max(rel_err(a, (up - down) / (2.0 * GRAD_STEP)));
    }
    worst
}

fn c5_gradients() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst_switch, mut worst_relu): (f64, f64) = (0.0, 0.0);
    for trial in 0..GRAD_TRIALS {
        let depth = rng.random_range(2..=3);
        let mut sizes: Vec<usize> = (0..depth).map(|_| rng.random_range(1..=5)).collect();
        sizes.push(rng.random_range(2..=5));
        let samples = rng.random_range(1..=10);
        let sw = ModelConfig::new(sizes.clone(), Activation::Switch).unwrap();
        worst_switch = worst_switch.max(grad_trial(&sw, trial, samples));
        let re = ModelConfig::new(sizes, Activation::Relu).unwrap();
        worst_relu = worst_relu.max(grad_trial(&re, trial, samples));
    }
    verdict(
        worst_switch < GRAD_TOL_SWITCH && worst_relu < GRAD_TOL_RELU,
        format!(
            "{GRAD_TRIALS} trials each: switch max rel err {worst_switch:.2e} (< {GRAD_TOL_SWITCH:e}), relu {worst_relu:.2e} (< {GRAD_TOL_RELU:e})"
        ),
    )
}

fn c6_switch_identities() -> Verdict {
    let (a, b) = (0.1, 20.0);
    let mut ode: f64 = 0.0;
    let mut comp: f64 = 0.0;
    let mut recip: f64 = 0.0;
    for k in 0..GRID_POINTS {
        let x = a + (b - a) * k as f64 / (GRID_POINTS - 1) as f64;
        let y = switch_sigma(x);
        let dy = (switch_sigma(x + ODE_STEP) - switch_sigma(x - ODE_STEP)) / (2.0 * ODE_STEP);
        ode = ode.max((dy - y.sqrt() * (1.0 - y)).abs());
        let back = switch_rho(y).unwrap();
        comp = comp.max((back - x).abs() / x);
        recip = recip.max((y * switch_rho(x).unwrap() - 1.0).abs());
    }
    let zero = switch_sigma(0.0) == 0.0 && switch_sigma(0.0).is_sign_positive();
    verdict(
        ode < ODE_TOL && comp < INVERSE_TOL && zero,
        format!(
            "ODE residual {ode:.2e} (< {ODE_TOL:e}); |rho(sigma(x)) - x|/x max {comp:.3e} (< {INVERSE_TOL:e}); sigma(0) = 0 {zero}; for reference |sigma*rho - 1| max {recip:.2e}"
        ),
    )
}

fn c7_homotopy_endpoints() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    let mut bad = 0;
    for trial in 0..HOMOTOPY_TRIALS {
        let dim = rng.random_range(1..=6);
        let classes = rng.random_range(2..=4);
        let n = rng.random_range(2..=30);
        let x: Vec<f64> = (0..n * dim).map(|_| rng.random::<f64>()).collect();
        let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
        let data = Dataset::new(x, y, dim, classes).unwrap();
        let mask: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
        let trained: Vec<usize> = (0..n).filter(|&i| !mask[i]).collect();
        let untrained: Vec<usize> = (0..n).filter(|&i| mask[i]).collect();
        let labels: BTreeSet<usize> = trained.iter().map(|&i| data.label(i)).collect();
        if untrained.iter().any(|&i| !labels.contains(&data.label(i))) {
            continue;
        }
        let split = SplitResult::from_parts(trained, untrained, n).unwrap();
        let plan = data::build_partner_plan(&split, &data, trial, PartnerPolicy::AllowRepeat).unwrap();
        checked += 1;
        let lambda: f64 = rng.random();
        let h0 = HybridDataset::new(&data, &plan, 0.0).unwrap();
        let h1 = HybridDataset::new(&data, &plan, 1.0).unwrap();
        let hl = HybridDataset::new(&data, &plan, lambda).unwrap();
        let bits = |v: &[f64]| v.iter().map(|f| f.to_bits()).collect::<Vec<_>>();
        let ok = (0..n).all(|i| {
            let clone = plan.partner(i).map_or(data.row(i), |j| data.row(j));
            bits(&h0.hybrid_input(i)) == bits(clone)
                && bits(&h1.hybrid_input(i)) == bits(data.row(i))
                && h0.label(i) == data.label(i)
                && h1.label(i) == data.label(i)
                && hl.label(i) == data.label(i)
        });
        if !ok {
            bad += 1;
        }
    }
    verdict(
        bad == 0 && checked > 0,
        format!("{checked} random datasets/plans, {bad} mismatches"),
    )
}

fn trace_ok(trace: &Trace) -> bool {
    let accepts: Vec<_> = trace.accepts().collect();
    !accepts.is_empty()
        && accepts.iter().all(|e| e.rate.correct == e.rate.total)
        && accepts.windows(2).all(|w| w[0].lambda < w[1].lambda)
        && accepts.last().unwrap().lambda == 1.0
}

fn c8_traces(desk: &Result<DeskRun, String>) -> Verdict {
    let mut finished = 0;
    let mut bad = Vec::new();
    for seed in [0, 1, 2, 4, 5] {
        let (config, params, data) = blob_problem(seed, 50);
        let split = data::split_by_correctness(&config, &params, &data).unwrap();
        let plan = data::build_partner_plan(&split, &data, seed, PartnerPolicy::AllowRepeat).unwrap();
        let out = gdt::run_continuation(&config, &params, &data, &split, &plan, &Default::default()).unwrap();
        if out.is_finished() {
            finished += 1;
            if !trace_ok(&out.trace) {
                bad.push(format!("blobs seed {seed}"));
            }
        }
    }
    if let Ok(run) = desk {
        if run.outcome.is_finished() {
            finished += 1;
            if !trace_ok(&run.outcome.trace) {
                bad.push("desk run".into());
            }
        }
    }
    verdict(
        bad.is_empty() && finished > 0,
        format!("{finished} finished runs checked, violations {bad:?}"),
    )
}

const FILE_FLAGS: [&str; 6] = ["--out", "--csv", "--checkpoint", "--new-csv", "--combined", "--trace"];

/// Runs one CLI command in-process with file arguments placed in `dir`.
fn cli(dir: &Path, args: &[&str]) -> Result<(), String> {
    let mut argv = vec![OsString::from("errfree")];
    for (i, a) in args.iter().enumerate() {
        if i > 0 && FILE_FLAGS.contains(&args[i - 1]) {
            argv.push(dir.join(a).into_os_string());
        } else {
            argv.push(a.into());
        }
    }
    match errfree_cli::run_from(argv) {
        0 => Ok(()),
        code => Err(format!("{args:?} exited with {code}")),
    }
}

fn pipeline(dir: &Path) -> Result<(), String> {
    let mnist = workspace_root().join("data/mnist");
    let images = mnist.join("train-images-idx3-ubyte.gz");
    let labels = mnist.join("train-labels-idx1-ubyte.gz");
    let (images, labels) = (images.to_str().unwrap(), labels.to_str().unwrap());
    cli(dir, &["synth", "--seed", "4", "--out", "blobs.csv"])?;
    let small = ["--set", "layers=2,16,3", "--set", "sgd.epochs=50"];
    let mut a = vec!["pretrain", "--seed", "1", "--csv", "blobs.csv", "--out", "p.ckpt"];
    a.extend(small);
    cli(dir, &a)?;
    let mut a = vec![
        "gdt",
        "--seed",
        "1",
        "--csv",
        "blobs.csv",
        "--checkpoint",
        "p.ckpt",
        "--out",
        "g.ckpt",
    ];
    a.extend(["--checkpoint-every", "2"]);
    a.extend(small);
    cli(dir, &a)?;
    cli(dir, &["synth", "--seed", "9", "--per-class", "3", "--out", "new.csv"])?;
    let mut a = vec![
        "cumulative",
        "--seed",
        "2",
        "--csv",
        "blobs.csv",
        "--new-csv",
        "new.csv",
    ];
    a.extend(["--checkpoint", "g.ckpt", "--out", "c.ckpt", "--combined", "all.csv"]);
    a.extend(small);
    cli(dir, &a)?;
    let mnist_set = ["--set", "samples=300", "--set", "sgd.epochs=3"];
    let mut a = vec![
        "pretrain", "--seed", "3", "--images", images, "--labels", labels, "--out", "m.ckpt",
    ];
    a.extend(mnist_set);
    cli(dir, &a)?;
    let mut a = vec!["export-clusters", "--seed", "3", "--images", images, "--labels", labels];
    a.extend(["--checkpoint", "m.ckpt", "--classes", "3,5,8", "--out", "clusters.csv"]);
    a.extend(mnist_set);
    cli(dir, &a)?;
    Ok(())
}

fn c9_cli_determinism() -> Verdict {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    if let Err(e) = pipeline(a.path()).and_then(|()| pipeline(b.path())) {
        return verdict(false, e);
    }
    let mut names: Vec<String> = std::fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    let differing: Vec<&String> = names
        .iter()
        .filter(|n| std::fs::read(a.path().join(n)).ok() != std::fs::read(b.path().join(n)).ok())
        .collect();
    let has = |n: &str| names.iter().any(|m| m == n);
    let complete = [
        "p.ckpt",
        "p.ckpt.train.csv",
        "g.ckpt",
        "g.ckpt.trace.csv",
        "m.ckpt",
        "clusters.csv",
    ]
    .iter()
    .all(|n| has(n));
    verdict(
        differing.is_empty() && complete,
        format!("{} files compared byte for byte, differing {differing:?}", names.len()),
    )
}

fn c10_clusters(desk: &Result<DeskRun, String>) -> Verdict {
    let run = match desk {
        Ok(r) if r.outcome.is_finished() => r,
        Ok(r) => return verdict(false, format!("desk run did not finish: {:?}", r.outcome.status)),
        Err(e) => return verdict(false, format!("desk run failed: {e}")),
    };
    let mut buf = Vec::new();
    let export =
        export_cluster_projection(&run.config, &run.outcome.params, &run.data, &CLUSTER_CLASSES, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    let header_ok = lines.next() == Some("p_a,p_b,p_c,label");
    let mut rows = 0;
    let mut misplaced = 0;
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let p: Vec<f64> = f[..3].iter().map(|v| v.parse().unwrap()).collect();
        let label: usize = f[3].parse().unwrap();
        rows += 1;
        if CLUSTER_CLASSES[ref_argmax(&p)] != label {
            misplaced += 1;
        }
    }
    let expected = run.data.labels().iter().filter(|l| CLUSTER_CLASSES.contains(l)).count();
    verdict(
        header_ok && rows == expected && export.rows == rows && misplaced == 0 && rows > 0,
        format!("classes {CLUSTER_CLASSES:?}: {rows} points, {misplaced} off their class vertex"),
    )
}

fn main() {
    let desk = desk_run();
    let results = [
        ("1 parameter counts", c1_param_counts()),
        ("2 error-free training, 2000 MNIST samples", c2_desk(&desk)),
        ("3 perfect start of the homotopy", c3_lambda0(&desk)),
        ("4 backtrack halving and step-floor abort", c4_backtrack()),
        ("5 backprop vs finite differences", c5_gradients()),
        ("6 switch-function identities", c6_switch_identities()),
        ("7 homotopy endpoints", c7_homotopy_endpoints()),
        ("8 continuation trace invariant", c8_traces(&desk)),
        ("9 CLI determinism", c9_cli_determinism()),
        ("10 cluster export", c10_clusters(&desk)),
    ];
    let mut failed = 0;
    for (name, v) in &results {
        println!(
            "{} criterion {name}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
        if !v.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
