use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Dataset, Task};
use crate::error::{Error, Result};
use crate::{rng, Real};

const SPLIT_TAG: u64 = 0x5011;
const BATCH_TAG: u64 = 0xba7c;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train: 0.8,
            valid: 0.1,
            test: 0.1,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn with_seed(seed: u64) -> Self {
        SplitSpec {
            seed,
            ..SplitSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.valid, self.test];
        if parts.iter().any(|f| !(*f > 0.0)) {
            return Err(Error::Config(format!("split fractions must be positive, got {parts:?}")));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split fractions must sum to 1, got {parts:?}")));
        }
        Ok(())
    }

    /// Partition sizes for `n` items: floor for train and valid, remainder to test.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let floor = |f: f64| ((n as f64) * f + 1e-9).floor() as usize;
        let train = floor(self.train).min(n);
        let valid = floor(self.valid).min(n - train);
        (train, valid, n - train - valid)
    }

    /// Shuffled index partition of `0..n`.
    pub fn indices(&self, n: usize) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
        self.validate()?;
        let (train, valid, test) = self.sizes(n);
        if train == 0 || valid == 0 || test == 0 {
            return Err(Error::Config(format!(
                "split of {n} graphs leaves an empty part ({train}/{valid}/{test})"
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng::stream(self.seed, &[SPLIT_TAG]));
        let rest = order.split_off(train);
        let (v, t) = rest.split_at(valid);
        Ok((order, v.to_vec(), t.to_vec()))
    }
}

/// Deterministic random train/valid/test split.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    let (a, b, c) = spec.indices(ds.len())?;
    Ok((ds.subset(&a), ds.subset(&b), ds.subset(&c)))
}

/// Graph indices grouped into batches for one epoch; the last batch may be short.
pub fn batches(n: usize, batch_size: usize, seed: u64, epoch: u64) -> Vec<Vec<usize>> {
    let batch_size = batch_size.max(1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, &[BATCH_TAG, epoch]));
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

/// Affine label transform fitted on the training split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelStats {
    pub mean: Real,
    pub std: Real,
}

impl LabelStats {
    pub const IDENTITY: LabelStats = LabelStats { mean: 0.0, std: 1.0 };

    /// Population mean and standard deviation of the given labels.
    pub fn fit(labels: &[Real]) -> Result<LabelStats> {
        if labels.is_empty() {
            return Err(Error::Config("cannot standardize an empty label set".into()));
        }
        let n = labels.len() as Real;
        let mean = labels.iter().sum::<Real>() / n;
        let var = labels.iter().map(|y| (y - mean).powi(2)).sum::<Real>() / n;
        let std = var.sqrt();
        if !(std >= 1e-12) {
            return Err(Error::Config(format!(
                "training labels have standard deviation {std:e}; need at least 1e-12"
            )));
        }
        Ok(LabelStats { mean, std })
    }

    pub fn standardize(&self, y: Real) -> Real {
        (y - self.mean) / self.std
    }

    pub fn destandardize(&self, z: Real) -> Real {
        z * self.std + self.mean
    }
}

/// Standardizes regression labels of `train` and `others` with train statistics.
/// Classification datasets are left untouched and get the identity transform.
pub fn standardize_labels(train: &mut Dataset, others: &mut [&mut Dataset]) -> Result<LabelStats> {
    if train.task == Task::Classification {
        return Ok(LabelStats::IDENTITY);
    }
    let labels = train
        .graphs
        .iter()
        .map(|g| {
            g.label
                .ok_or_else(|| Error::Config(format!("training graph '{}' has no label", g.id)))
        })
        .collect::<Result<Vec<_>>>()?;
    let stats = LabelStats::fit(&labels)?;
    for ds in std::iter::once(train).chain(others.iter_mut().map(|d| &mut **d)) {
        for g in &mut ds.graphs {
            g.label = g.label.map(|y| stats.standardize(y));
        }
    }
    Ok(stats)
}
