//! End-to-end error-free training on MNIST: SGD pre-training, partner
//! plan, then continuation to 100% training accuracy.
//!
//!     cargo run --release -p errfree --example reproduce_mnist -- \
//!         <images.idx> <labels.idx> [samples] [hidden] [seed]
//!
//! With the official 60,000-image training files and `samples = 60000`
//! this is an hours-long run on one core.

use std::env;
use std::time::Instant;

use errfree::data::{self, idx, LabeledData, PartnerPolicy};
use errfree::gdt::{self, ContinuationSettings, EventKind};
use errfree::network::{self, Activation, ModelConfig};
use errfree::sgd::{self, SgdSettings};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = env::args().collect();
    let images = args
        .get(1)
        .map(String::as_str)
        .unwrap_or("data/mnist/train-images-idx3-ubyte.gz");
    let labels = args
        .get(2)
        .map(String::as_str)
        .unwrap_or("data/mnist/train-labels-idx1-ubyte.gz");
    let samples: usize = args.get(3).map_or(Ok(2000), |s| s.parse())?;
    let hidden: usize = args.get(4).map_or(Ok(20), |s| s.parse())?;
    let seed: u64 = args.get(5).map_or(Ok(1), |s| s.parse())?;
    let epochs: usize = env::var("EPOCHS").ok().map_or(Ok(200), |s| s.parse())?;
    let target: f64 = env::var("TARGET").ok().map_or(Ok(0.95), |s| s.parse())?;
    let gd_lr: f64 = env::var("GD_LR").ok().map_or(Ok(1.0), |s| s.parse())?;
    let gd_budget: usize = env::var("GD_BUDGET").ok().map_or(Ok(200), |s| s.parse())?;
    let gd_tol: f64 = env::var("GD_TOL").ok().map_or(Ok(1e-5), |s| s.parse())?;
    let sgd_lr: f64 = env::var("SGD_LR").ok().map_or(Ok(0.1), |s| s.parse())?;

    let full = idx::load_idx_dataset(images, labels, 10)?;
    let train = full.seeded_subset(samples, seed)?;
    println!("{} samples, classes {:?}", train.len(), train.class_histogram());

    let config = ModelConfig::new(vec![784, hidden, 10], Activation::Switch)?;
    let p0 = network::init_params(&config, seed);
    let mut settings = SgdSettings::for_activation(Activation::Switch);
    settings.learning_rate = sgd_lr;
    settings.epochs = epochs;
    settings.shuffle_seed = seed.wrapping_add(1);
    settings.target_rate = Some(target);
    let t = Instant::now();
    let (params, report) = sgd::train_sgd(&config, &p0, &train, None::<&data::Dataset>, &settings)?;
    let last = report.last().unwrap();
    println!(
        "sgd: {} epochs, train PR {} loss {:.4} in {:.1}s",
        last.epoch,
        last.train_rate,
        last.train_loss,
        t.elapsed().as_secs_f64()
    );

    let split = data::split_by_correctness(&config, &params, &train)?;
    let plan = data::build_partner_plan(&split, &train, seed, PartnerPolicy::AllowRepeat)?;
    println!("untrained {}, partner mode {:?}", split.untrained.len(), plan.mode());

    let mut cs = ContinuationSettings::default();
    cs.descent.learning_rate = gd_lr;
    cs.descent.budget = gd_budget;
    cs.descent.tolerance = gd_tol;
    let t = Instant::now();
    let out = gdt::run_continuation(&config, &params, &train, &split, &plan, &cs)?;
    println!(
        "gdt: {:?} lambda {} PR {} in {:.1}s; accepts {} backtracks {} grows {} descent iters {}",
        out.status,
        out.lambda,
        out.final_rate,
        t.elapsed().as_secs_f64(),
        out.trace.count(EventKind::Accept),
        out.trace.count(EventKind::Backtrack),
        out.trace.count(EventKind::Grow),
        out.trace.descent_iterations()
    );
    if env::var("SHOW_TRACE").is_ok() {
        out.trace.write_csv(std::io::stdout())?;
    }
    Ok(())
}
