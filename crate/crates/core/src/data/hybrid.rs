use std::borrow::Cow;

use super::{DataError, Dataset, LabeledData, PartnerPlan};

/// The homotopy between the partner data (at `lambda = 0`) and the true
/// data (at `lambda = 1`).
///
/// Only untrained samples move: their input is `(1 - lambda) * partner +
/// lambda * own`. Trained samples and all labels are fixed.
#[derive(Debug, Clone, Copy)]
pub struct HybridDataset<'a> {
    base: &'a Dataset,
    plan: &'a PartnerPlan,
    lambda: f64,
}

impl<'a> HybridDataset<'a> {
    pub fn new(base: &'a Dataset, plan: &'a PartnerPlan, lambda: f64) -> Result<Self, DataError> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(DataError::Synthetic(format!("lambda {lambda} outside [0, 1]")));
        }
        for (u, t) in plan.pairs() {
            let bad = [u, t].into_iter().find(|&i| i >= base.len());
            if let Some(index) = bad {
                return Err(DataError::IndexRange { index, len: base.len() });
            }
        }
        Ok(Self { base, plan, lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn base(&self) -> &'a Dataset {
        self.base
    }

    pub fn plan(&self) -> &'a PartnerPlan {
        self.plan
    }

    pub fn at(&self, lambda: f64) -> Result<Self, DataError> {
        Self::new(self.base, self.plan, lambda)
    }

    /// The input of sample `index` before blending: the partner's input for
    /// untrained samples, the sample's own input otherwise.
    pub fn clone_input(&self, index: usize) -> &'a [f64] {
        match self.plan.partner(index) {
            Some(p) => self.base.row(p),
            None => self.base.row(index),
        }
    }

    pub fn hybrid_input(&self, index: usize) -> Cow<'a, [f64]> {
        let Some(partner) = self.plan.partner(index) else {
            return Cow::Borrowed(self.base.row(index));
        };
        if self.lambda == 0.0 {
            return Cow::Borrowed(self.base.row(partner));
        }
        if self.lambda == 1.0 {
            return Cow::Borrowed(self.base.row(index));
        }
        let (a, b) = (1.0 - self.lambda, self.lambda);
        Cow::Owned(
            self.base
                .row(partner)
                .iter()
                .zip(self.base.row(index))
                .map(|(c, t)| a * c + b * t)
                .collect(),
        )
    }

    /// Blends every sample into an owned dataset, for repeated evaluation.
    pub fn materialize(&self) -> Dataset {
        let d = self.base.input_dim();
        let mut inputs = Vec::with_capacity(self.base.len() * d);
        for i in 0..self.base.len() {
            inputs.extend(self.hybrid_input(i).iter().map(|v| v.clamp(0.0, 1.0)));
        }
        Dataset::new(inputs, self.base.labels().to_vec(), d, self.base.class_count())
            .expect("convex blend of valid inputs is valid")
    }
}

impl LabeledData for HybridDataset<'_> {
    fn len(&self) -> usize {
        self.base.len()
    }

    fn input_dim(&self) -> usize {
        self.base.input_dim()
    }

    fn class_count(&self) -> usize {
        self.base.class_count()
    }

    fn input(&self, index: usize) -> Cow<'_, [f64]> {
        self.hybrid_input(index)
    }

    fn label(&self, index: usize) -> usize {
        self.base.label(index)
    }
}
