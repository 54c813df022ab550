use std::collections::BTreeMap;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DataError, LabeledData, SplitResult};

/// How partners were actually drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartnerMode {
    SameLabelNoRepeat,
    SameLabelWithRepeat,
}

/// What to do when a class has more untrained than trained samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PartnerPolicy {
    /// Fail with the deficient class id.
    Strict,
    /// Reuse partners for that class only, logging a warning.
    #[default]
    AllowRepeat,
}

/// Maps every untrained sample index to the trained sample whose input it
/// borrows at the start of the homotopy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartnerPlan {
    partner_of: BTreeMap<usize, usize>,
    mode: PartnerMode,
    /// Classes for which partners had to be reused.
    repeated_classes: Vec<usize>,
}

impl PartnerPlan {
    pub fn empty() -> Self {
        Self {
            partner_of: BTreeMap::new(),
            mode: PartnerMode::SameLabelNoRepeat,
            repeated_classes: Vec::new(),
        }
    }

    /// Builds a plan from an explicit map, validating it against `split` and
    /// the labels in `data`.
    pub fn from_map<D: LabeledData + ?Sized>(
        partner_of: BTreeMap<usize, usize>,
        split: &SplitResult,
        data: &D,
    ) -> Result<Self, DataError> {
        let mask = split.untrained_mask();
        if split.len() != data.len() || partner_of.len() != split.untrained.len() {
            return Err(DataError::BadSplit { len: data.len() });
        }
        let mut used = std::collections::BTreeSet::new();
        let mut repeated = false;
        for (&u, &t) in &partner_of {
            if u >= mask.len() || t >= mask.len() || !mask[u] || mask[t] {
                return Err(DataError::BadSplit { len: data.len() });
            }
            if data.label(u) != data.label(t) {
                return Err(DataError::LabelRange {
                    index: t,
                    label: data.label(t),
                    classes: data.class_count(),
                });
            }
            repeated |= !used.insert(t);
        }
        Ok(Self {
            partner_of,
            mode: if repeated {
                PartnerMode::SameLabelWithRepeat
            } else {
                PartnerMode::SameLabelNoRepeat
            },
            repeated_classes: Vec::new(),
        })
    }

    pub fn partner(&self, untrained: usize) -> Option<usize> {
        self.partner_of.get(&untrained).copied()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.partner_of.iter().map(|(&u, &t)| (u, t))
    }

    pub fn len(&self) -> usize {
        self.partner_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partner_of.is_empty()
    }

    pub fn mode(&self) -> PartnerMode {
        self.mode
    }

    pub fn repeated_classes(&self) -> &[usize] {
        &self.repeated_classes
    }
}

/// Pairs each untrained sample with a trained sample of the same label.
///
/// Untrained samples are visited in index order; partners are drawn
/// uniformly without replacement from the seeded stream. A class whose
/// trained pool runs dry either fails (`Strict`) or switches to drawing
/// with replacement (`AllowRepeat`). A class with no trained member at all
/// is always an error.
pub fn build_partner_plan<D: LabeledData + ?Sized>(
    split: &SplitResult,
    data: &D,
    seed: u64,
    policy: PartnerPolicy,
) -> Result<PartnerPlan, DataError> {
    if split.len() != data.len() {
        return Err(DataError::BadSplit { len: data.len() });
    }
    let classes = data.class_count();
    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for &t in &split.trained {
        pools[data.label(t)].push(t);
    }
    let mut demand = vec![0usize; classes];
    for &u in &split.untrained {
        demand[data.label(u)] += 1;
    }
    for class in 0..classes {
        let (untrained, trained) = (demand[class], pools[class].len());
        let short = untrained > trained;
        if untrained > 0 && (trained == 0 || (short && policy == PartnerPolicy::Strict)) {
            return Err(DataError::InfeasiblePartner {
                class,
                untrained,
                trained,
            });
        }
    }

    let full_pools = pools.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut partner_of = BTreeMap::new();
    let mut repeated_classes = Vec::new();
    for &u in &split.untrained {
        let class = data.label(u);
        let pool = &mut pools[class];
        let t = if pool.is_empty() {
            if !repeated_classes.contains(&class) {
                warn!(
                    "class {class}: {} untrained vs {} trained samples, reusing partners",
                    demand[class],
                    full_pools[class].len()
                );
                repeated_classes.push(class);
            }
            let all = &full_pools[class];
            all[rng.random_range(0..all.len())]
        } else {
            pool.swap_remove(rng.random_range(0..pool.len()))
        };
        partner_of.insert(u, t);
    }
    repeated_classes.sort_unstable();
    Ok(PartnerPlan {
        partner_of,
        mode: if repeated_classes.is_empty() {
            PartnerMode::SameLabelNoRepeat
        } else {
            PartnerMode::SameLabelWithRepeat
        },
        repeated_classes,
    })
}
