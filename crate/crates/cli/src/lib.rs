//! Library side of the `errfree` command: argument parsing and the
//! subcommands, so the binary and in-process callers share one entry point.
//!
//! Exit status: 0 on success, 2 when a continuation aborts, 3 on bad
//! input (usage, missing or malformed files, invalid settings), 1 on any
//! other failure.

pub mod config;

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use errfree::analysis::{self, SweepGrid};
use errfree::data::{self, idx, Dataset, LabeledData, SyntheticSpec};
use errfree::gdt::{self, ContinuationOutcome, GradientCorrector, Status};
use errfree::network::{self, checkpoint, Activation, ModelConfig, Params};
use errfree::sgd;

use config::RunConfig;

/// Relative data paths are resolved against this directory when set.
pub const DATA_DIR_ENV: &str = "ERRFREE_DATA_DIR";

#[derive(Parser)]
#[command(name = "errfree", version, about = "Error-free training of small dense networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Seed for every random choice the command makes.
    #[arg(long)]
    seed: u64,
    /// Run configuration file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args, Clone, Default)]
struct DataArgs {
    /// IDX image file (optionally gzip-compressed).
    #[arg(long, requires = "labels", conflicts_with = "csv")]
    images: Option<PathBuf>,
    /// IDX label file (optionally gzip-compressed).
    #[arg(long, requires = "images")]
    labels: Option<PathBuf>,
    /// CSV dataset with header `x0,...,label`.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Minibatch SGD pre-training from a seeded initialization.
    Pretrain {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        /// Held-out CSV evaluated at every report.
        #[arg(long)]
        test_csv: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Training curve CSV; defaults to `<out>.train.csv`.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Continue a checkpoint along the data homotopy to 100% training PR.
    Gdt {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Continuation trace CSV; defaults to `<out>.trace.csv`.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Also write `<out>.accept-NNNNN` every this many accepted steps.
        #[arg(long)]
        checkpoint_every: Option<usize>,
    },
    /// Print the exact positive rate and mean loss of a checkpoint.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Write three-class output probabilities as `p_a,p_b,p_c,label`.
    ExportClusters {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Exactly three distinct class ids, comma separated.
        #[arg(long, value_delimiter = ',')]
        classes: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Backprop against central differences on a small random net.
    Gradcheck {
        #[arg(long)]
        seed: u64,
        #[arg(long, value_delimiter = ',', default_value = "5,5,5")]
        layers: Vec<usize>,
        #[arg(long, default_value = "switch")]
        activation: Activation,
        #[arg(long, default_value_t = 10)]
        samples: usize,
        /// Also sweep the switch-function identities over (0.1, 20).
        #[arg(long)]
        identities: bool,
    },
    /// Write a Gaussian-blob dataset as CSV.
    Synth {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        blobs: usize,
        #[arg(long, default_value_t = 50)]
        per_class: usize,
        #[arg(long, default_value_t = 0.05)]
        spread: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Learn new samples while keeping every old sample correct.
    Cumulative {
        #[command(flatten)]
        common: Common,
        /// Data the checkpoint already classifies perfectly.
        #[command(flatten)]
        data: DataArgs,
        /// New samples as CSV.
        #[arg(long)]
        new_csv: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Combined dataset (old rows first) as CSV.
        #[arg(long)]
        combined: Option<PathBuf>,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
}

enum Failure {
    Input(anyhow::Error),
    Aborted(String),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

trait InputError<T> {
    fn input(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> InputError<T> for Result<T, E> {
    fn input(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Input(e.into()))
    }
}

type Outcome = Result<(), Failure>;

/// Parses `args` (program name first) and runs the command, printing
/// results to stdout and errors to stderr. Returns the exit status.
pub fn run_from<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(Failure::Aborted(msg)) => {
            eprintln!("aborted: {msg}");
            2
        }
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            3
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Pretrain {
            common,
            data,
            test_csv,
            out,
            report,
        } => pretrain(&common, &data, test_csv.as_deref(), &out, report),
        Command::Gdt {
            common,
            data,
            checkpoint,
            out,
            trace,
            checkpoint_every,
        } => continue_to_perfect(&common, &data, &checkpoint, &out, trace, checkpoint_every),
        Command::Eval {
            common,
            data,
            checkpoint,
        } => eval(&common, &data, &checkpoint),
        Command::ExportClusters {
            common,
            data,
            checkpoint,
            classes,
            out,
        } => export_clusters(&common, &data, &checkpoint, &classes, &out),
        Command::Gradcheck {
            seed,
            layers,
            activation,
            samples,
            identities,
        } => gradcheck(seed, layers, activation, samples, identities),
        Command::Synth {
            seed,
            blobs,
            per_class,
            spread,
            out,
        } => {
            let set = data::make_synthetic(&SyntheticSpec::new(blobs, per_class, spread, seed)).input()?;
            write_file(&out, |w| data::write_csv(&set, w))?;
            println!("wrote {} samples in {blobs} classes to {}", set.len(), out.display());
            Ok(())
        }
        Command::Cumulative {
            common,
            data,
            new_csv,
            checkpoint,
            out,
            combined,
            trace,
        } => cumulative(&common, &data, &new_csv, &checkpoint, &out, combined, trace),
    }
}

fn load_config(common: &Common) -> Result<RunConfig, Failure> {
    let mut config = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read config {}", path.display()))
                .input()?;
            RunConfig::parse(&text)
                .with_context(|| format!("in {}", path.display()))
                .input()?
        }
        None => RunConfig::default(),
    };
    for kv in &common.overrides {
        config.apply(kv).input()?;
    }
    Ok(config)
}

fn data_path(path: &Path) -> PathBuf {
    match std::env::var_os(DATA_DIR_ENV) {
        Some(dir) if path.is_relative() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn read_csv_file(path: &Path, classes: usize) -> Result<Dataset, Failure> {
    let path = data_path(path);
    let file = File::open(&path)
        .with_context(|| format!("cannot open {}", path.display()))
        .input()?;
    data::read_csv(BufReader::new(file), classes)
        .with_context(|| format!("in {}", path.display()))
        .input()
}

/// Loads the dataset named by `args` with labels below `classes`, then
/// takes the configured seeded subset.
fn load_data(args: &DataArgs, config: &RunConfig, classes: usize, seed: u64) -> Result<Dataset, Failure> {
    let full = match (&args.images, &args.labels, &args.csv) {
        (Some(images), Some(labels), None) => {
            idx::load_idx_dataset(data_path(images), data_path(labels), classes).input()?
        }
        (None, None, Some(csv)) => read_csv_file(csv, classes)?,
        _ => return Err(Failure::Input(anyhow!("give either --images and --labels, or --csv"))),
    };
    if config.samples == 0 {
        Ok(full)
    } else {
        full.seeded_subset(config.samples, seed).input()
    }
}

fn load_checkpoint(path: &Path) -> Result<(ModelConfig, Params), Failure> {
    checkpoint::load(path).input()
}

fn check_dims(model: &ModelConfig, data: &Dataset) -> Outcome {
    if model.input_dim() != data.input_dim() {
        return Err(Failure::Input(anyhow!(
            "model expects {} inputs but the data has {}",
            model.input_dim(),
            data.input_dim()
        )));
    }
    Ok(())
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<()> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = BufWriter::new(file);
    body(&mut w)
        .and_then(|()| w.flush())
        .with_context(|| format!("cannot write {}", path.display()))
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

fn save(path: &Path, model: &ModelConfig, params: &Params) -> Result<()> {
    checkpoint::save(path, model, params).map_err(Into::into)
}

/// Effective configuration next to an output checkpoint.
fn record_config(out: &Path, config: &RunConfig, seed: u64) -> Result<()> {
    let path = sibling(out, ".config");
    write_file(&path, |w| write!(w, "# seed {seed}\n{}", config.emit()))
}

fn pretrain(
    common: &Common,
    data_args: &DataArgs,
    test_csv: Option<&Path>,
    out: &Path,
    report_path: Option<PathBuf>,
) -> Outcome {
    let config = load_config(common)?;
    let model = config.model().input()?;
    let train = load_data(data_args, &config, model.class_count(), common.seed)?;
    check_dims(&model, &train)?;
    let test = test_csv.map(|p| read_csv_file(p, model.class_count())).transpose()?;
    if let Some(t) = &test {
        check_dims(&model, t)?;
    }
    let p0 = network::init_params(&model, common.seed);
    let settings = config.sgd(common.seed.wrapping_add(1));
    let (params, report) = sgd::train_sgd(&model, &p0, &train, test.as_ref(), &settings).map_err(|e| match e {
        sgd::SgdError::InvalidSettings(_) => Failure::Input(e.into()),
        e => Failure::Other(e.into()),
    })?;
    save(out, &model, &params)?;
    record_config(out, &config, common.seed)?;
    let report_path = report_path.unwrap_or_else(|| sibling(out, ".train.csv"));
    write_file(&report_path, |w| report.write_csv(w))?;
    let rate = network::positive_rate(&model, &params, &train).map_err(anyhow::Error::from)?;
    println!("PR {rate}");
    println!("checkpoint: {}", out.display());
    println!("report: {}", report_path.display());
    Ok(())
}

fn report_outcome(outcome: &ContinuationOutcome, out: &Path, trace_path: &Path) -> Outcome {
    match &outcome.status {
        Status::Finished => {
            println!("PR {}", outcome.final_rate);
            println!("checkpoint: {}", out.display());
            println!("trace: {}", trace_path.display());
            Ok(())
        }
        Status::Aborted(reason) => {
            println!("PR {}", outcome.final_rate);
            Err(Failure::Aborted(format!(
                "{reason:?} at lambda {}; last accepted parameters in {}, trace in {}",
                outcome.lambda,
                out.display(),
                trace_path.display()
            )))
        }
    }
}

fn gdt_input_error(e: gdt::GdtError) -> Failure {
    match e {
        gdt::GdtError::Network(_) => Failure::Other(e.into()),
        e => Failure::Input(e.into()),
    }
}

fn continue_to_perfect(
    common: &Common,
    data_args: &DataArgs,
    checkpoint_path: &Path,
    out: &Path,
    trace_path: Option<PathBuf>,
    every: Option<usize>,
) -> Outcome {
    let config = load_config(common)?;
    config.continuation.validate().input()?;
    let (model, params) = load_checkpoint(checkpoint_path)?;
    let train = load_data(data_args, &config, model.class_count(), common.seed)?;
    check_dims(&model, &train)?;

    let split = data::split_by_correctness(&model, &params, &train).map_err(anyhow::Error::from)?;
    let plan = data::build_partner_plan(&split, &train, common.seed, config.partner_policy).input()?;
    println!(
        "untrained {} of {}, partner mode {:?}",
        split.untrained.len(),
        train.len(),
        plan.mode()
    );

    let mut accepts = 0usize;
    let mut write_error = None;
    let mut on_accept = |state: &gdt::ContinuationState| {
        accepts += 1;
        let Some(k) = every.filter(|&k| k > 0) else {
            return;
        };
        if accepts.is_multiple_of(k) && write_error.is_none() {
            let path = sibling(out, &format!(".accept-{accepts:05}"));
            if let Err(e) = save(&path, &model, &state.params) {
                write_error = Some(e);
            }
        }
    };
    let outcome = gdt::run_continuation_with(
        &model,
        &params,
        &train,
        &split,
        &plan,
        &config.continuation,
        &GradientCorrector(config.continuation.descent),
        &mut on_accept,
    )
    .map_err(gdt_input_error)?;
    if let Some(e) = write_error {
        return Err(e.into());
    }

    let trace_path = trace_path.unwrap_or_else(|| sibling(out, ".trace.csv"));
    save(out, &model, &outcome.params)?;
    record_config(out, &config, common.seed)?;
    write_file(&trace_path, |w| outcome.trace.write_csv(w))?;
    report_outcome(&outcome, out, &trace_path)
}

fn eval(common: &Common, data_args: &DataArgs, checkpoint_path: &Path) -> Outcome {
    let config = load_config(common)?;
    let (model, params) = load_checkpoint(checkpoint_path)?;
    let set = load_data(data_args, &config, model.class_count(), common.seed)?;
    check_dims(&model, &set)?;
    let e = network::evaluate(&model, &params, &set, false).map_err(anyhow::Error::from)?;
    println!("PR {}", e.positive_rate());
    println!("loss {}", e.mean_loss());
    Ok(())
}

fn export_clusters(
    common: &Common,
    data_args: &DataArgs,
    checkpoint_path: &Path,
    classes: &[usize],
    out: &Path,
) -> Outcome {
    if classes.len() != 3 {
        return Err(Failure::Input(anyhow!(
            "--classes needs exactly three class ids, got {}",
            classes.len()
        )));
    }
    let config = load_config(common)?;
    let (model, params) = load_checkpoint(checkpoint_path)?;
    let set = load_data(data_args, &config, model.class_count(), common.seed)?;
    check_dims(&model, &set)?;
    let file = File::create(out)
        .with_context(|| format!("cannot create {}", out.display()))
        .input()?;
    let mut w = BufWriter::new(file);
    let export = analysis::export_cluster_projection(&model, &params, &set, classes, &mut w).map_err(|e| match e {
        analysis::AnalysisError::InvalidClasses(_) => Failure::Input(e.into()),
        e => Failure::Other(e.into()),
    })?;
    w.flush().context("flushing cluster export")?;
    println!("wrote {} points to {}", export.rows, out.display());
    for c in export.missing {
        println!("warning: class {c} has no samples");
    }
    Ok(())
}

fn gradcheck(seed: u64, layers: Vec<usize>, activation: Activation, samples: usize, identities: bool) -> Outcome {
    let model = ModelConfig::new(layers, activation).input()?;
    let report = analysis::gradcheck(&model, seed, samples).input()?;
    let stdout = io::stdout();
    report.write_text(stdout.lock()).context("writing report")?;
    if identities {
        let sweep = analysis::activation_property_sweep(&SweepGrid::default()).input()?;
        sweep.write_text(stdout.lock()).context("writing report")?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cumulative(
    common: &Common,
    data_args: &DataArgs,
    new_csv: &Path,
    checkpoint_path: &Path,
    out: &Path,
    combined_path: Option<PathBuf>,
    trace_path: Option<PathBuf>,
) -> Outcome {
    let config = load_config(common)?;
    config.continuation.validate().input()?;
    let (model, params) = load_checkpoint(checkpoint_path)?;
    let old = load_data(data_args, &config, model.class_count(), common.seed)?;
    check_dims(&model, &old)?;
    let new = read_csv_file(new_csv, model.class_count())?;
    check_dims(&model, &new)?;
    let samples: Vec<data::Sample> = new.samples().collect();
    let (outcome, combined) = gdt::cumulative_train(
        &model,
        &params,
        &old,
        &samples,
        &config.continuation,
        common.seed,
        config.partner_policy,
    )
    .map_err(gdt_input_error)?;
    let trace_path = trace_path.unwrap_or_else(|| sibling(out, ".trace.csv"));
    save(out, &model, &outcome.params)?;
    record_config(out, &config, common.seed)?;
    write_file(&trace_path, |w| outcome.trace.write_csv(w))?;
    if let Some(path) = combined_path {
        write_file(&path, |w| data::write_csv(&combined, w))?;
    }
    report_outcome(&outcome, out, &trace_path)
}
