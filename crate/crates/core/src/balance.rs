//! Class balancing: random under/oversampling, SMOTE and cost weights.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Label, LabeledDataset};
use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_SMOTE_K: usize = 5;

/// Per-class misclassification costs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub fail: f64,
    pub pass: f64,
}

impl ClassWeights {
    pub const UNIT: ClassWeights = ClassWeights {
        fail: 1.0,
        pass: 1.0,
    };

    pub fn new(fail: f64, pass: f64) -> Result<Self> {
        if !(fail > 0.0 && pass > 0.0 && fail.is_finite() && pass.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "class weights must be positive, got ({fail}, {pass})"
            )));
        }
        Ok(ClassWeights { fail, pass })
    }

    pub fn of(&self, label: Label) -> f64 {
        match label {
            Label::Fail => self.fail,
            Label::Pass => self.pass,
        }
    }

    pub fn is_unit(&self) -> bool {
        self.fail == 1.0 && self.pass == 1.0
    }
}

impl Default for ClassWeights {
    fn default() -> Self {
        Self::UNIT
    }
}

/// Downsamples the majority class without replacement to the minority
/// count. Output keeps input row order.
pub fn random_undersample(train: &LabeledDataset, seed: u64) -> Result<LabeledDataset> {
    let (majority, minority) = train.majority_minority()?;
    let mut rng = rng::seeded(seed);
    let mut keep = train.indices_of(majority);
    keep.shuffle(&mut rng);
    keep.truncate(train.count(minority));
    keep.extend(train.indices_of(minority));
    keep.sort_unstable();
    train.select(&keep)
}

/// Adds minority copies, drawn with replacement, until the classes match.
pub fn random_oversample(train: &LabeledDataset, seed: u64) -> Result<LabeledDataset> {
    let (majority, minority) = train.majority_minority()?;
    let mut rng = rng::seeded(seed);
    let pool = train.indices_of(minority);
    let extra = train.count(majority) - pool.len();
    let mut idx: Vec<usize> = (0..train.n_rows()).collect();
    idx.extend((0..extra).map(|_| *pool.choose(&mut rng).expect("minority is nonempty")));
    train.select(&idx)
}

/// Where a SMOTE synthetic came from: `base + lambda * (neighbor − base)`,
/// indices into the input dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticOrigin {
    pub base: usize,
    pub neighbor: usize,
    pub lambda: f64,
}

pub fn smote(train: &LabeledDataset, k: usize, seed: u64) -> Result<LabeledDataset> {
    smote_with_origins(train, k, seed).map(|(d, _)| d)
}

/// SMOTE with provenance for every synthetic row (appended after the
/// originals, in the same order as the returned origins).
///
/// Minority rows are visited round-robin in row order, one synthetic per
/// visit. Neighbours are the `k` nearest other minority rows under plain
/// Euclidean distance on raw values.
pub fn smote_with_origins(
    train: &LabeledDataset,
    k: usize,
    seed: u64,
) -> Result<(LabeledDataset, Vec<SyntheticOrigin>)> {
    let (majority, minority) = train.majority_minority()?;
    let members = train.indices_of(minority);
    if k == 0 {
        return Err(Error::InvalidArgument("SMOTE k must be positive".into()));
    }
    if members.len() < k + 1 {
        return Err(Error::InvalidArgument(format!(
            "SMOTE needs at least {} minority rows for k = {k}, found {}",
            k + 1,
            members.len()
        )));
    }
    let neighbors: Vec<Vec<usize>> = members
        .iter()
        .map(|&i| {
            let mut d: Vec<(f64, usize)> = members
                .iter()
                .filter(|&&m| m != i)
                .map(|&m| (squared_euclidean(train.row(i), train.row(m)), m))
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.into_iter().take(k).map(|(_, m)| m).collect()
        })
        .collect();

    let needed = train.count(majority) - members.len();
    let mut rng = rng::seeded(seed);
    let mut rows = Vec::with_capacity(needed);
    let mut origins = Vec::with_capacity(needed);
    for s in 0..needed {
        let slot = s % members.len();
        let base = members[slot];
        let neighbor = *neighbors[slot].choose(&mut rng).expect("k >= 1");
        let lambda: f64 = rng.random();
        let row: Vec<f64> = train
            .row(base)
            .iter()
            .zip(train.row(neighbor))
            .map(|(&a, &b)| a + lambda * (b - a))
            .collect();
        rows.push(row);
        origins.push(SyntheticOrigin {
            base,
            neighbor,
            lambda,
        });
    }
    let labels = vec![minority; needed];
    Ok((train.with_extra_rows(&rows, &labels)?, origins))
}

fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Majority weight 1, minority weight equal to the imbalance ratio.
pub fn cost_weights(train: &LabeledDataset) -> Result<ClassWeights> {
    let (majority, minority) = train.majority_minority()?;
    let ratio = train.count(majority) as f64 / train.count(minority) as f64;
    Ok(match minority {
        Label::Fail => ClassWeights {
            fail: ratio,
            pass: 1.0,
        },
        Label::Pass => ClassWeights {
            fail: 1.0,
            pass: ratio,
        },
    })
}
