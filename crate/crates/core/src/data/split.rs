use super::{DataError, LabeledData};
use crate::network::{ModelConfig, NetworkError, Params};

/// Partition of sample indices into correctly (`trained`) and incorrectly
/// (`untrained`) classified sets. Both are sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitResult {
    pub trained: Vec<usize>,
    pub untrained: Vec<usize>,
}

impl SplitResult {
    /// Builds a split from explicit index sets, checking that they partition
    /// `0..len`.
    pub fn from_parts(mut trained: Vec<usize>, mut untrained: Vec<usize>, len: usize) -> Result<Self, DataError> {
        trained.sort_unstable();
        untrained.sort_unstable();
        let mut seen = vec![false; len];
        for &i in trained.iter().chain(&untrained) {
            if i >= len || seen[i] {
                return Err(DataError::BadSplit { len });
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(DataError::BadSplit { len });
        }
        Ok(Self { trained, untrained })
    }

    pub fn len(&self) -> usize {
        self.trained.len() + self.untrained.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Membership mask over all indices: `true` for untrained.
    pub fn untrained_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.len()];
        for &i in &self.untrained {
            mask[i] = true;
        }
        mask
    }
}

/// Splits `data` by whether the model's argmax prediction (lowest index on
/// ties) matches the label.
pub fn split_by_correctness<D: LabeledData + ?Sized>(
    config: &ModelConfig,
    params: &Params,
    data: &D,
) -> Result<SplitResult, NetworkError> {
    let correct = crate::network::correctness(config, params, data)?;
    let (mut trained, mut untrained) = (Vec::new(), Vec::new());
    for (i, ok) in correct.into_iter().enumerate() {
        if ok {
            trained.push(i);
        } else {
            untrained.push(i);
        }
    }
    Ok(SplitResult { trained, untrained })
}
