#![allow(dead_code)]

use errfree::data::{self, make_synthetic, Dataset, PartnerPlan, PartnerPolicy, SplitResult, SyntheticSpec};
use errfree::gdt::{EventKind, Trace};
use errfree::network::{self, Activation, ModelConfig, Params};
use errfree::sgd::{self, SgdSettings};

pub struct Problem {
    pub config: ModelConfig,
    pub params: Params,
    pub data: Dataset,
    pub split: SplitResult,
    pub plan: PartnerPlan,
}

/// Three overlapping blobs, 50 points each, on a 2-16-3 switch net trained
/// for 50 epochs. Seeds 0, 1 and 5 leave a few misclassified points and
/// finish the continuation quickly.
pub fn blobs(seed: u64) -> Problem {
    let data = make_synthetic(&SyntheticSpec::new(3, 50, 0.1, seed)).unwrap();
    let config = ModelConfig::new(vec![2, 16, 3], Activation::Switch).unwrap();
    let p0 = network::init_params(&config, seed);
    let mut settings = SgdSettings::for_activation(Activation::Switch);
    settings.epochs = 50;
    settings.shuffle_seed = seed;
    let (params, _) = sgd::train_sgd(&config, &p0, &data, None::<&Dataset>, &settings).unwrap();
    let split = data::split_by_correctness(&config, &params, &data).unwrap();
    let plan = data::build_partner_plan(&split, &data, seed, PartnerPolicy::AllowRepeat).unwrap();
    Problem {
        config,
        params,
        data,
        split,
        plan,
    }
}

/// Every accept is 100% and accepted lambdas rise strictly, ending at 1.
pub fn assert_finished_trace(trace: &Trace) {
    let accepts: Vec<_> = trace.accepts().collect();
    assert!(!accepts.is_empty());
    for e in &accepts {
        assert_eq!(e.rate.correct, e.rate.total, "{e:?}");
    }
    for w in accepts.windows(2) {
        assert!(w[0].lambda < w[1].lambda, "{:?} then {:?}", w[0], w[1]);
    }
    assert_eq!(accepts.last().unwrap().lambda, 1.0);
    assert_eq!(trace.events.last().unwrap().kind, EventKind::Finish);
}
