//! Counterfactual generation: WhatIf, NICE and MOC.
//!
//! All three methods explain an instance the model labels fail and look for
//! inputs labelled pass. They take the model through [`Classifier`], so toy
//! models work as well as fitted forests.

mod moc;
mod nice;
pub mod nsga;
mod whatif;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{Label, LabeledDataset};
use crate::distance::{nearest_among, Metric, RangeTable};
use crate::error::{Error, Result};
use crate::forest::{Classifier, THRESHOLD};

pub use moc::{moc, MocConfig};
pub use nice::{nice, NiceReward};
pub use whatif::{whatif, DEFAULT_WHATIF_K};

/// Neighbours averaged by the plausibility objective.
pub const PLAUSIBILITY_K: usize = 5;

/// Smallest validity objective for an instance still labelled fail. Keeps
/// `o_v = 0` exclusive to the pass region when the fail probability sits
/// exactly on the threshold.
pub const MIN_SHORTFALL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "whatif")]
    WhatIf,
    #[serde(rename = "moc")]
    Moc,
    #[serde(rename = "nice_sp")]
    NiceSp,
    #[serde(rename = "nice_pr")]
    NicePr,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::WhatIf, Method::Moc, Method::NiceSp, Method::NicePr];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::WhatIf => "whatif",
            Method::Moc => "moc",
            Method::NiceSp => "nice_sp",
            Method::NicePr => "nice_pr",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method {s:?}"))
    }
}

/// An instance to explain. The desired outcome is always pass.
#[derive(Debug, Clone, PartialEq)]
pub struct CfRequest {
    pub id: usize,
    pub x: Vec<f64>,
    pub mutable: Vec<bool>,
    /// Per-feature `(lo, hi)` search bounds.
    pub bounds: Vec<(f64, f64)>,
}

impl CfRequest {
    /// All features mutable, bounds from the training ranges. Fails unless
    /// the model labels `x` fail.
    pub fn new<M: Classifier + ?Sized>(
        id: usize,
        x: Vec<f64>,
        model: &M,
        train: &LabeledDataset,
    ) -> Result<Self> {
        let bounds = train.specs().iter().map(|s| (s.min, s.max)).collect();
        Self::with_mask(id, x, vec![true; train.n_features()], bounds, model)
    }

    pub fn with_mask<M: Classifier + ?Sized>(
        id: usize,
        x: Vec<f64>,
        mutable: Vec<bool>,
        bounds: Vec<(f64, f64)>,
        model: &M,
    ) -> Result<Self> {
        let p = model.n_features();
        for len in [x.len(), mutable.len(), bounds.len()] {
            if len != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: len,
                });
            }
        }
        if !mutable.iter().any(|&m| m) {
            return Err(Error::InvalidArgument("no mutable feature".into()));
        }
        if let Some((lo, hi)) = bounds.iter().find(|(lo, hi)| lo > hi || lo.is_nan() || hi.is_nan()) {
            return Err(Error::InvalidArgument(format!("bad bounds ({lo}, {hi})")));
        }
        if model.predict(&x) != Label::Fail {
            return Err(Error::InvalidArgument(format!(
                "request {id}: model already predicts pass"
            )));
        }
        Ok(CfRequest {
            id,
            x,
            mutable,
            bounds,
        })
    }

    pub fn desired(&self) -> Label {
        Label::Pass
    }

    pub(crate) fn mutable_indices(&self) -> Vec<usize> {
        (0..self.x.len()).filter(|&j| self.mutable[j]).collect()
    }

    /// Whether `row` agrees with `x` on every immutable feature.
    pub(crate) fn respects_mask(&self, row: &[f64]) -> bool {
        self.x
            .iter()
            .zip(row)
            .zip(&self.mutable)
            .all(|((a, b), &m)| m || a == b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GenerationMeta {
    WhatIf {
        rank: usize,
        pool_index: usize,
        distance: f64,
    },
    Moc {
        /// Generation in which this candidate was created (0 = initial).
        generation: usize,
        objectives: MocObjectives,
    },
    Nice {
        nun_index: usize,
        /// Features copied from the nearest unlike neighbour, in order.
        copied: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterfactual {
    pub request_id: usize,
    pub method: Method,
    pub values: Vec<f64>,
    pub meta: GenerationMeta,
}

/// The four minimisation targets of the multi-objective search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MocObjectives {
    /// Shortfall of the fail probability below the threshold; 0 iff pass.
    pub o_v: f64,
    /// Gower distance to the explained instance.
    pub o_p: f64,
    /// Number of changed features.
    pub o_s: usize,
    /// Mean Gower distance to the nearest training rows.
    pub o_pl: f64,
}

impl MocObjectives {
    pub fn as_array(&self) -> [f64; 4] {
        [self.o_v, self.o_p, self.o_s as f64, self.o_pl]
    }
}

pub(crate) fn validity_shortfall(p_fail: f64) -> f64 {
    if p_fail < THRESHOLD {
        0.0
    } else {
        (p_fail - THRESHOLD).max(MIN_SHORTFALL)
    }
}

pub(crate) fn changed_features(x: &[f64], cand: &[f64]) -> usize {
    x.iter().zip(cand).filter(|(a, b)| a != b).count()
}

pub(crate) fn mean_knn_gower(cand: &[f64], train: &LabeledDataset, k: usize, ranges: &RangeTable) -> f64 {
    let k = k.min(train.n_rows());
    let nn = nearest_among(cand, train.rows().enumerate(), Metric::Gower, k, ranges);
    nn.iter().map(|n| n.distance).sum::<f64>() / k as f64
}

pub fn objectives<M: Classifier + ?Sized>(
    x: &[f64],
    cand: &[f64],
    model: &M,
    train: &LabeledDataset,
    ranges: &RangeTable,
) -> Result<MocObjectives> {
    for v in [x, cand] {
        if v.len() != model.n_features() || v.len() != train.n_features() || v.len() != ranges.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.n_features(),
                got: v.len(),
            });
        }
    }
    if ranges.active_features() == 0 {
        return Err(Error::AllWidthsZero);
    }
    Ok(objectives_unchecked(x, cand, model, train, ranges))
}

pub(crate) fn objectives_unchecked<M: Classifier + ?Sized>(
    x: &[f64],
    cand: &[f64],
    model: &M,
    train: &LabeledDataset,
    ranges: &RangeTable,
) -> MocObjectives {
    MocObjectives {
        o_v: validity_shortfall(model.proba_fail(cand)),
        o_p: ranges.gower_unchecked(x, cand),
        o_s: changed_features(x, cand),
        o_pl: mean_knn_gower(cand, train, PLAUSIBILITY_K, ranges),
    }
}
