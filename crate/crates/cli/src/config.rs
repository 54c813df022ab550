//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are
//! an error. Keys, with defaults:
//!
//! ```text
//! layers               784,20,10
//! activation           switch          switch | relu
//! softmax_scale        (by activation: 1 for switch, 100 for relu)
//! init_range           (by activation: 0.5 for switch, 5 for relu)
//! samples              0               seeded subset size, 0 = all
//! sgd.learning_rate    (by activation: 0.1 for switch, 0.01 for relu)
//! sgd.batch_size       32
//! sgd.epochs           200
//! sgd.target_rate      none            stop once train PR reaches this
//! sgd.report_every     1
//! gdt.initial_step     0.1
//! gdt.backtrack_factor 0.5
//! gdt.growth_factor    2
//! gdt.growth_after     2
//! gdt.min_step         1e-6
//! gdt.max_attempts     100000
//! gd.learning_rate     1
//! gd.budget            200
//! gd.tolerance         1e-5
//! partner.policy       allow-repeat    strict | allow-repeat
//! ```

use std::fmt::Write as _;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use errfree::data::PartnerPolicy;
use errfree::gdt::ContinuationSettings;
use errfree::network::{Activation, ModelConfig};
use errfree::sgd::SgdSettings;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub layers: Vec<usize>,
    pub activation: Activation,
    pub softmax_scale: Option<f64>,
    pub init_range: Option<f64>,
    pub samples: usize,
    pub sgd_learning_rate: Option<f64>,
    pub sgd_batch_size: usize,
    pub sgd_epochs: usize,
    pub sgd_target_rate: Option<f64>,
    pub sgd_report_every: usize,
    pub continuation: ContinuationSettings,
    pub partner_policy: PartnerPolicy,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            layers: vec![784, 20, 10],
            activation: Activation::Switch,
            softmax_scale: None,
            init_range: None,
            samples: 0,
            sgd_learning_rate: None,
            sgd_batch_size: 32,
            sgd_epochs: 200,
            sgd_target_rate: None,
            sgd_report_every: 1,
            continuation: ContinuationSettings::default(),
            partner_policy: PartnerPolicy::AllowRepeat,
        }
    }
}

pub const KEYS: &[&str] = &[
    "layers",
    "activation",
    "softmax_scale",
    "init_range",
    "samples",
    "sgd.learning_rate",
    "sgd.batch_size",
    "sgd.epochs",
    "sgd.target_rate",
    "sgd.report_every",
    "gdt.initial_step",
    "gdt.backtrack_factor",
    "gdt.growth_factor",
    "gdt.growth_after",
    "gdt.min_step",
    "gdt.max_attempts",
    "gd.learning_rate",
    "gd.budget",
    "gd.tolerance",
    "partner.policy",
];

fn num<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    value.parse().with_context(|| format!("bad value {value:?} for {key}"))
}

fn optional(key: &str, value: &str) -> Result<Option<f64>> {
    if value == "none" {
        Ok(None)
    } else {
        num(key, value).map(Some)
    }
}

fn show(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| x.to_string())
}

fn policy_name(p: PartnerPolicy) -> &'static str {
    match p {
        PartnerPolicy::Strict => "strict",
        PartnerPolicy::AllowRepeat => "allow-repeat",
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let c = &mut self.continuation;
        match key.trim() {
            "layers" => {
                self.layers = value
                    .split(',')
                    .map(|s| num("layers", s.trim()))
                    .collect::<Result<_>>()?
            }
            "activation" => self.activation = value.parse().map_err(|e: String| anyhow!(e))?,
            "softmax_scale" => self.softmax_scale = optional(key, value)?,
            "init_range" => self.init_range = optional(key, value)?,
            "samples" => self.samples = num(key, value)?,
            "sgd.learning_rate" => self.sgd_learning_rate = optional(key, value)?,
            "sgd.batch_size" => self.sgd_batch_size = num(key, value)?,
            "sgd.epochs" => self.sgd_epochs = num(key, value)?,
            "sgd.target_rate" => self.sgd_target_rate = optional(key, value)?,
            "sgd.report_every" => self.sgd_report_every = num(key, value)?,
            "gdt.initial_step" => c.initial_step = num(key, value)?,
            "gdt.backtrack_factor" => c.backtrack_factor = num(key, value)?,
            "gdt.growth_factor" => c.growth_factor = num(key, value)?,
            "gdt.growth_after" => c.growth_after = num(key, value)?,
            "gdt.min_step" => c.min_step = num(key, value)?,
            "gdt.max_attempts" => c.max_attempts = num(key, value)?,
            "gd.learning_rate" => c.descent.learning_rate = num(key, value)?,
            "gd.budget" => c.descent.budget = num(key, value)?,
            "gd.tolerance" => c.descent.tolerance = num(key, value)?,
            "partner.policy" => {
                self.partner_policy = match value {
                    "strict" => PartnerPolicy::Strict,
                    "allow-repeat" => PartnerPolicy::AllowRepeat,
                    _ => bail!("bad value {value:?} for partner.policy (strict | allow-repeat)"),
                }
            }
            other => bail!("unknown config key {other:?}; known keys: {}", KEYS.join(", ")),
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| anyhow!("expected key=value, got {assignment:?}"))?;
        self.set(k, v)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            config.apply(line).with_context(|| format!("config line {}", n + 1))?;
        }
        Ok(config)
    }

    pub fn emit(&self) -> String {
        let c = &self.continuation;
        let layers: Vec<String> = self.layers.iter().map(usize::to_string).collect();
        let mut out = String::new();
        let mut put = |k: &str, v: String| writeln!(out, "{k} = {v}").expect("string write");
        put("layers", layers.join(","));
        put("activation", self.activation.to_string());
        put("softmax_scale", show(self.softmax_scale));
        put("init_range", show(self.init_range));
        put("samples", self.samples.to_string());
        put("sgd.learning_rate", show(self.sgd_learning_rate));
        put("sgd.batch_size", self.sgd_batch_size.to_string());
        put("sgd.epochs", self.sgd_epochs.to_string());
        put("sgd.target_rate", show(self.sgd_target_rate));
        put("sgd.report_every", self.sgd_report_every.to_string());
        put("gdt.initial_step", c.initial_step.to_string());
        put("gdt.backtrack_factor", c.backtrack_factor.to_string());
        put("gdt.growth_factor", c.growth_factor.to_string());
        put("gdt.growth_after", c.growth_after.to_string());
        put("gdt.min_step", c.min_step.to_string());
        put("gdt.max_attempts", c.max_attempts.to_string());
        put("gd.learning_rate", c.descent.learning_rate.to_string());
        put("gd.budget", c.descent.budget.to_string());
        put("gd.tolerance", c.descent.tolerance.to_string());
        put("partner.policy", policy_name(self.partner_policy).to_string());
        out
    }

    pub fn model(&self) -> Result<ModelConfig> {
        let defaults = ModelConfig::new(self.layers.clone(), self.activation)?;
        Ok(ModelConfig::with_options(
            self.layers.clone(),
            self.activation,
            self.softmax_scale.unwrap_or(defaults.softmax_scale()),
            self.init_range.unwrap_or(defaults.init_range()),
        )?)
    }

    pub fn sgd(&self, seed: u64) -> SgdSettings {
        let mut s = SgdSettings::for_activation(self.activation);
        if let Some(lr) = self.sgd_learning_rate {
            s.learning_rate = lr;
        }
        s.batch_size = self.sgd_batch_size;
        s.epochs = self.sgd_epochs;
        s.report_every = self.sgd_report_every;
        s.target_rate = self.sgd_target_rate;
        s.shuffle_seed = seed;
        s
    }
}
