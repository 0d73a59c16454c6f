//! Nearest-instance counterfactuals.
//!
//! Starting from the explained instance, features are copied one at a time
//! from its nearest unlike neighbour (the HEOM-closest training row that is
//! labelled pass and predicted pass) until the prediction flips. Each step
//! commits the copy with the highest reward:
//!
//! * sparsity: gain in pass probability;
//! * proximity: gain in pass probability per unit of Gower distance added.

use super::{CfRequest, Counterfactual, GenerationMeta, Method};
use crate::dataset::{Label, LabeledDataset};
use crate::distance::{nearest_among, Metric, RangeTable};
use crate::error::{Error, Result};
use crate::forest::Classifier;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NiceReward {
    Sparsity,
    Proximity,
}

impl NiceReward {
    pub fn method(self) -> Method {
        match self {
            NiceReward::Sparsity => Method::NiceSp,
            NiceReward::Proximity => Method::NicePr,
        }
    }
}

pub fn nice<M: Classifier + ?Sized>(
    req: &CfRequest,
    model: &M,
    train: &LabeledDataset,
    reward: NiceReward,
    ranges: &RangeTable,
) -> Result<Counterfactual> {
    if train.n_features() != req.x.len() || ranges.dim() != req.x.len() {
        return Err(Error::DimensionMismatch {
            expected: req.x.len(),
            got: train.n_features(),
        });
    }
    let pool = train.rows().enumerate().filter(|&(i, row)| {
        train.label(i) == Label::Pass && model.predict(row) == Label::Pass && req.respects_mask(row)
    });
    let nun = nearest_among(&req.x, pool, Metric::Heom, 1, ranges)
        .first()
        .map(|n| n.index)
        .ok_or_else(|| {
            Error::NoCounterfactual("no training row is both labelled and predicted pass".into())
        })?;
    let z = train.row(nun);

    let mut current = req.x.clone();
    let mut copied = Vec::new();
    while model.predict(&current) != Label::Pass {
        let base = model.proba_pass(&current);
        let mut best: Option<(usize, f64)> = None;
        for j in req.mutable_indices() {
            if current[j] == z[j] {
                continue;
            }
            let old = current[j];
            current[j] = z[j];
            let gain = model.proba_pass(&current) - base;
            current[j] = old;
            let score = match reward {
                NiceReward::Sparsity => gain,
                NiceReward::Proximity => {
                    let cost = ranges.gower_term(j, old, z[j]);
                    gain / cost.max(f64::MIN_POSITIVE)
                }
            };
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        let Some((j, _)) = best else {
            // Every mutable feature already matches the neighbour.
            return Err(Error::NoCounterfactual(format!(
                "request {}: copying all mutable features does not flip the prediction",
                req.id
            )));
        };
        current[j] = z[j];
        copied.push(j);
    }
    Ok(Counterfactual {
        request_id: req.id,
        method: reward.method(),
        values: current,
        meta: GenerationMeta::Nice {
            nun_index: nun,
            copied,
        },
    })
}
