use super::{CfRequest, Counterfactual, GenerationMeta, Method};
use crate::dataset::{Label, LabeledDataset};
use crate::distance::{nearest_among, Metric, RangeTable};
use crate::error::{Error, Result};
use crate::forest::Classifier;

pub const DEFAULT_WHATIF_K: usize = 10;

/// The `k` Gower-nearest pool rows that the model labels pass.
///
/// Candidates are filtered on the model's prediction rather than the
/// observed label, so every result is valid. Rows that differ from the
/// request on an immutable feature are skipped.
pub fn whatif<M: Classifier + ?Sized>(
    req: &CfRequest,
    model: &M,
    pool: &LabeledDataset,
    k: usize,
    ranges: &RangeTable,
) -> Result<Vec<Counterfactual>> {
    if k == 0 {
        return Err(Error::InvalidArgument("WhatIf k must be positive".into()));
    }
    if pool.n_features() != req.x.len() || ranges.dim() != req.x.len() {
        return Err(Error::DimensionMismatch {
            expected: req.x.len(),
            got: pool.n_features(),
        });
    }
    let candidates: Vec<(usize, &[f64])> = pool
        .rows()
        .enumerate()
        .filter(|(_, row)| req.respects_mask(row) && model.predict(row) == Label::Pass)
        .collect();
    if candidates.len() < k {
        return Err(Error::NotEnoughCandidates {
            requested: k,
            available: candidates.len(),
        });
    }
    let nearest = nearest_among(&req.x, candidates, Metric::Gower, k, ranges);
    Ok(nearest
        .into_iter()
        .enumerate()
        .map(|(rank, n)| Counterfactual {
            request_id: req.id,
            method: Method::WhatIf,
            values: pool.row(n.index).to_vec(),
            meta: GenerationMeta::WhatIf {
                rank,
                pool_index: n.index,
                distance: n.distance,
            },
        })
        .collect())
}
