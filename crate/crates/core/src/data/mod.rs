//! Datasets, IDX ingestion, correctness splits, partner plans and the
//! hybrid (homotopy) dataset.

mod hybrid;
pub mod idx;
mod partner;
mod split;
mod synthetic;

use std::borrow::Cow;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use hybrid::HybridDataset;
pub use partner::{build_partner_plan, PartnerMode, PartnerPlan, PartnerPolicy};
pub use split::{split_by_correctness, SplitResult};
pub use synthetic::{make_synthetic, SyntheticSpec};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("dataset is empty")]
    Empty,
    #[error("sample {index}: input has length {found}, expected {expected}")]
    InputLength {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("sample {index}: input component {component} = {value} is outside [0, 1]")]
    InputRange { index: usize, component: usize, value: f64 },
    #[error("sample {index}: label {label} is out of range for {classes} classes")]
    LabelRange { index: usize, label: usize, classes: usize },
    #[error("{inputs} inputs but {labels} labels")]
    CountMismatch { inputs: usize, labels: usize },
    #[error("class count must be at least 1")]
    NoClasses,
    #[error("index {index} out of range for {len} samples")]
    IndexRange { index: usize, len: usize },
    #[error("no-repeat partner selection is infeasible for class {class}: {untrained} untrained vs {trained} trained samples")]
    InfeasiblePartner {
        class: usize,
        untrained: usize,
        trained: usize,
    },
    #[error("split does not partition {len} samples")]
    BadSplit { len: usize },
    #[error("invalid synthetic spec: {0}")]
    Synthetic(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One labelled input vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Vec<f64>,
    pub label: usize,
}

/// Read access shared by true datasets and hybrids, so loss, gradient and
/// positive-rate evaluation work on either.
pub trait LabeledData {
    fn len(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn class_count(&self) -> usize;
    fn input(&self, index: usize) -> Cow<'_, [f64]>;
    fn label(&self, index: usize) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Ordered samples stored row-major in one contiguous buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Vec<f64>,
    labels: Vec<usize>,
    input_dim: usize,
    class_count: usize,
}

impl Dataset {
    /// Builds a dataset from row-major inputs, checking every invariant:
    /// nonempty, finite inputs in `[0, 1]`, labels below `class_count`.
    pub fn new(inputs: Vec<f64>, labels: Vec<usize>, input_dim: usize, class_count: usize) -> Result<Self, DataError> {
        if class_count == 0 {
            return Err(DataError::NoClasses);
        }
        if labels.is_empty() || input_dim == 0 {
            return Err(DataError::Empty);
        }
        if inputs.len() != labels.len() * input_dim {
            return Err(DataError::CountMismatch {
                inputs: inputs.len() / input_dim,
                labels: labels.len(),
            });
        }
        for (index, row) in inputs.chunks_exact(input_dim).enumerate() {
            if let Some((component, &value)) = row.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
                return Err(DataError::InputRange {
                    index,
                    component,
                    value,
                });
            }
        }
        if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= class_count) {
            return Err(DataError::LabelRange {
                index,
                label,
                classes: class_count,
            });
        }
        Ok(Self {
            inputs,
            labels,
            input_dim,
            class_count,
        })
    }

    pub fn from_samples(samples: &[Sample], class_count: usize) -> Result<Self, DataError> {
        let first = samples.first().ok_or(DataError::Empty)?;
        let input_dim = first.input.len();
        let mut inputs = Vec::with_capacity(samples.len() * input_dim);
        for (index, s) in samples.iter().enumerate() {
            if s.input.len() != input_dim {
                return Err(DataError::InputLength {
                    index,
                    expected: input_dim,
                    found: s.input.len(),
                });
            }
            inputs.extend_from_slice(&s.input);
        }
        let labels = samples.iter().map(|s| s.label).collect();
        Self::new(inputs, labels, input_dim, class_count)
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.inputs[index * self.input_dim..(index + 1) * self.input_dim]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sample(&self, index: usize) -> Sample {
        Sample {
            input: self.row(index).to_vec(),
            label: self.labels[index],
        }
    }

    pub fn samples(&self) -> impl Iterator<Item = Sample> + '_ {
        (0..self.len()).map(|i| self.sample(i))
    }

    /// New dataset holding the given rows, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self, DataError> {
        let mut inputs = Vec::with_capacity(indices.len() * self.input_dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(DataError::IndexRange {
                    index: i,
                    len: self.len(),
                });
            }
            inputs.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self::new(inputs, labels, self.input_dim, self.class_count)
    }

    /// `count` rows drawn without replacement, in draw order. Asking for
    /// `len()` or more returns every row in seeded shuffled order.
    pub fn seeded_subset(&self, count: usize, seed: u64) -> Result<Self, DataError> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        order.truncate(count);
        self.subset(&order)
    }

    /// Appends `other` after `self`. Class count is the larger of the two.
    pub fn concat(&self, other: &Dataset) -> Result<Self, DataError> {
        if other.input_dim != self.input_dim {
            return Err(DataError::InputLength {
                index: self.len(),
                expected: self.input_dim,
                found: other.input_dim,
            });
        }
        let mut inputs = self.inputs.clone();
        inputs.extend_from_slice(&other.inputs);
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Self::new(inputs, labels, self.input_dim, self.class_count.max(other.class_count))
    }

    /// Label counts, indexed by class.
    pub fn class_histogram(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

impl LabeledData for Dataset {
    fn len(&self) -> usize {
        self.labels.len()
    }

    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn class_count(&self) -> usize {
        self.class_count
    }

    fn input(&self, index: usize) -> Cow<'_, [f64]> {
        Cow::Borrowed(self.row(index))
    }

    fn label(&self, index: usize) -> usize {
        self.labels[index]
    }
}

/// Index view over another dataset, e.g. one minibatch.
#[derive(Debug, Clone, Copy)]
pub struct Subset<'a, D: ?Sized> {
    data: &'a D,
    indices: &'a [usize],
}

impl<'a, D: LabeledData + ?Sized> Subset<'a, D> {
    /// Panics on lookup if an index is out of range for `data`.
    pub fn new(data: &'a D, indices: &'a [usize]) -> Self {
        Self { data, indices }
    }
}

impl<D: LabeledData + ?Sized> LabeledData for Subset<'_, D> {
    fn len(&self) -> usize {
        self.indices.len()
    }

    fn input_dim(&self) -> usize {
        self.data.input_dim()
    }

    fn class_count(&self) -> usize {
        self.data.class_count()
    }

    fn input(&self, index: usize) -> Cow<'_, [f64]> {
        self.data.input(self.indices[index])
    }

    fn label(&self, index: usize) -> usize {
        self.data.label(self.indices[index])
    }
}

/// Writes any labelled data as CSV: `x0,...,x{d-1},label`.
pub fn write_csv<D: LabeledData + ?Sized, W: Write>(data: &D, mut out: W) -> std::io::Result<()> {
    let d = data.input_dim();
    let header: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
    writeln!(out, "{},label", header.join(","))?;
    for i in 0..data.len() {
        let input = data.input(i);
        for v in input.iter() {
            write!(out, "{v},")?;
        }
        writeln!(out, "{}", data.label(i))?;
    }
    Ok(())
}

/// Reads the CSV layout produced by [`write_csv`].
pub fn read_csv<R: std::io::BufRead>(reader: R, class_count: usize) -> Result<Dataset, DataError> {
    let mut lines = reader.lines();
    let header = lines.next().ok_or(DataError::Empty)??;
    let columns = header.split(',').count();
    if columns < 2 {
        return Err(DataError::Empty);
    }
    let input_dim = columns - 1;
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    for (index, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns {
            return Err(DataError::InputLength {
                index,
                expected: input_dim,
                found: fields.len().saturating_sub(1),
            });
        }
        for f in &fields[..input_dim] {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|_| std::io::Error::new(std::io::ErrorKind::InvalidData, format!("bad number {f:?}")))?;
            inputs.push(v);
        }
        let label: usize = fields[input_dim].trim().parse().map_err(|_| {
            std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("bad label {:?}", fields[input_dim]),
            )
        })?;
        labels.push(label);
    }
    Dataset::new(inputs, labels, input_dim, class_count)
}
