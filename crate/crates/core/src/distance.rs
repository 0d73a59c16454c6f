//! Range-normalised distances and exact nearest-neighbour search.

use std::cmp::Ordering;

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Numeric,
    /// Compared by equality only: distance 0 on a match, 1 otherwise.
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Gower,
    Heom,
}

/// Per-feature normalisation widths (`max − min` over the training set).
#[derive(Debug, Clone, PartialEq)]
pub struct RangeTable {
    widths: Vec<f64>,
    kinds: Vec<FeatureKind>,
    // 1 / width for numeric features with nonzero width, else 0.
    inv: Vec<f64>,
    active: usize,
}

impl RangeTable {
    pub fn new(widths: Vec<f64>) -> Result<Self> {
        let kinds = vec![FeatureKind::Numeric; widths.len()];
        Self::with_kinds(widths, kinds)
    }

    pub fn with_kinds(widths: Vec<f64>, kinds: Vec<FeatureKind>) -> Result<Self> {
        if widths.len() != kinds.len() {
            return Err(Error::DimensionMismatch {
                expected: widths.len(),
                got: kinds.len(),
            });
        }
        if let Some(w) = widths.iter().find(|w| **w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid range width {w}")));
        }
        let inv: Vec<f64> = widths
            .iter()
            .zip(&kinds)
            .map(|(&w, &k)| match k {
                FeatureKind::Numeric if w > 0.0 => 1.0 / w,
                _ => 0.0,
            })
            .collect();
        let active = kinds
            .iter()
            .zip(&inv)
            .filter(|(&k, &i)| k == FeatureKind::Categorical || i > 0.0)
            .count();
        Ok(RangeTable {
            widths,
            kinds,
            inv,
            active,
        })
    }

    pub fn from_dataset(data: &LabeledDataset) -> Self {
        Self::new(data.specs().iter().map(|s| s.width()).collect())
            .expect("dataset specs always have finite nonnegative widths")
    }

    pub fn dim(&self) -> usize {
        self.widths.len()
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn is_zero_width(&self, j: usize) -> bool {
        self.kinds[j] == FeatureKind::Numeric && self.inv[j] == 0.0
    }

    /// Number of features that contribute to distances.
    pub fn active_features(&self) -> usize {
        self.active
    }

    /// Unclamped normalised difference on feature `j`.
    #[inline]
    pub fn term(&self, j: usize, a: f64, b: f64) -> f64 {
        match self.kinds[j] {
            FeatureKind::Numeric => (a - b).abs() * self.inv[j],
            FeatureKind::Categorical => {
                if a == b {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }

    /// Contribution of feature `j` to the Gower mean (already divided by
    /// the number of active features).
    #[inline]
    pub fn gower_term(&self, j: usize, a: f64, b: f64) -> f64 {
        self.term(j, a, b).min(1.0) / self.active as f64
    }

    fn check(&self, a: &[f64], b: &[f64]) -> Result<()> {
        for v in [a, b] {
            if v.len() != self.dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.dim(),
                    got: v.len(),
                });
            }
        }
        if self.active == 0 {
            return Err(Error::AllWidthsZero);
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn gower_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for j in 0..a.len() {
            s += self.term(j, a[j], b[j]).min(1.0);
        }
        s / self.active as f64
    }

    #[inline]
    pub(crate) fn heom_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for j in 0..a.len() {
            let t = self.term(j, a[j], b[j]);
            s += t * t;
        }
        s.sqrt()
    }

    pub(crate) fn distance_unchecked(&self, metric: Metric, a: &[f64], b: &[f64]) -> f64 {
        match metric {
            Metric::Gower => self.gower_unchecked(a, b),
            Metric::Heom => self.heom_unchecked(a, b),
        }
    }
}

/// Mean of per-feature normalised absolute differences over features with
/// nonzero width. Per-feature terms are clamped at 1 so values outside the
/// table's range stay bounded.
pub fn gower(a: &[f64], b: &[f64], ranges: &RangeTable) -> Result<f64> {
    ranges.check(a, b)?;
    Ok(ranges.gower_unchecked(a, b))
}

/// Heterogeneous Euclidean-overlap metric: range-normalised Euclidean
/// distance on numeric features, 0/1 overlap on categorical ones.
pub fn heom(a: &[f64], b: &[f64], ranges: &RangeTable) -> Result<f64> {
    ranges.check(a, b)?;
    Ok(ranges.heom_unchecked(a, b))
}

pub fn distance(metric: Metric, a: &[f64], b: &[f64], ranges: &RangeTable) -> Result<f64> {
    match metric {
        Metric::Gower => gower(a, b, ranges),
        Metric::Heom => heom(a, b, ranges),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

pub(crate) fn by_distance_then_index(a: &Neighbor, b: &Neighbor) -> Ordering {
    a.distance
        .total_cmp(&b.distance)
        .then(a.index.cmp(&b.index))
}

/// Exact k-NN by linear scan over `(index, row)` candidates. Ties go to the
/// lower index.
pub(crate) fn nearest_among<'a, I>(
    query: &[f64],
    candidates: I,
    metric: Metric,
    k: usize,
    ranges: &RangeTable,
) -> Vec<Neighbor>
where
    I: IntoIterator<Item = (usize, &'a [f64])>,
{
    let mut all: Vec<Neighbor> = candidates
        .into_iter()
        .map(|(index, row)| Neighbor {
            index,
            distance: ranges.distance_unchecked(metric, query, row),
        })
        .collect();
    if k == 0 {
        return Vec::new();
    }
    if k < all.len() {
        all.select_nth_unstable_by(k - 1, by_distance_then_index);
        all.truncate(k);
    }
    all.sort_by(by_distance_then_index);
    all
}

/// The `k` pool members closest to `query`, ascending by distance.
pub fn k_nearest<R: AsRef<[f64]>>(
    query: &[f64],
    pool: &[R],
    metric: Metric,
    k: usize,
    ranges: &RangeTable,
) -> Result<Vec<Neighbor>> {
    if pool.is_empty() {
        return Err(Error::InvalidArgument("k-NN pool is empty".into()));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if k > pool.len() {
        return Err(Error::NotEnoughCandidates {
            requested: k,
            available: pool.len(),
        });
    }
    for row in pool {
        ranges.check(query, row.as_ref())?;
    }
    Ok(nearest_among(
        query,
        pool.iter().map(AsRef::as_ref).enumerate(),
        metric,
        k,
        ranges,
    ))
}

/// k-NN over the rows of a dataset.
pub fn k_nearest_in(
    query: &[f64],
    data: &LabeledDataset,
    metric: Metric,
    k: usize,
    ranges: &RangeTable,
) -> Result<Vec<Neighbor>> {
    let rows: Vec<&[f64]> = data.rows().collect();
    k_nearest(query, &rows, metric, k, ranges)
}
