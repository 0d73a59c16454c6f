//! Quality scores for counterfactuals and their per-cell summaries.
//!
//! Metric definitions (lower is better for all but validity):
//!
//! * validity: 1 if the model labels the counterfactual pass;
//! * proximity: Gower distance to the explained instance;
//! * sparsity: number of changed features;
//! * minimality: number of changed features that can each be reverted on
//!   its own without losing the pass label (0 = every change needed);
//! * plausibility: Gower distance to the nearest training row (0 = the
//!   counterfactual is a real instance).
//!
//! Minimality is a one-at-a-time reversion test, not a search over subsets.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cell::CellId;
use crate::cfgen::{changed_features, Counterfactual};
use crate::dataset::{Label, LabeledDataset};
use crate::distance::{nearest_among, Metric, RangeTable};
use crate::error::{Error, Result};
use crate::forest::Classifier;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityRecord {
    pub cell: CellId,
    pub request_id: usize,
    pub validity: u8,
    pub proximity: f64,
    pub sparsity: usize,
    pub minimality: usize,
    pub plausibility: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum QualityMetric {
    Validity,
    Proximity,
    Sparsity,
    Minimality,
    Plausibility,
}

impl QualityMetric {
    pub const ALL: [QualityMetric; 5] = [
        QualityMetric::Validity,
        QualityMetric::Proximity,
        QualityMetric::Sparsity,
        QualityMetric::Minimality,
        QualityMetric::Plausibility,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QualityMetric::Validity => "validity",
            QualityMetric::Proximity => "proximity",
            QualityMetric::Sparsity => "sparsity",
            QualityMetric::Minimality => "minimality",
            QualityMetric::Plausibility => "plausibility",
        }
    }

    pub fn of(self, r: &QualityRecord) -> f64 {
        match self {
            QualityMetric::Validity => r.validity as f64,
            QualityMetric::Proximity => r.proximity,
            QualityMetric::Sparsity => r.sparsity as f64,
            QualityMetric::Minimality => r.minimality as f64,
            QualityMetric::Plausibility => r.plausibility,
        }
    }
}

pub fn score<M: Classifier + ?Sized>(
    x: &[f64],
    cf: &Counterfactual,
    model: &M,
    train: &LabeledDataset,
    ranges: &RangeTable,
    cell: CellId,
) -> Result<QualityRecord> {
    let p = x.len();
    for len in [cf.values.len(), model.n_features(), train.n_features(), ranges.dim()] {
        if len != p {
            return Err(Error::DimensionMismatch { expected: p, got: len });
        }
    }
    if ranges.active_features() == 0 {
        return Err(Error::AllWidthsZero);
    }
    let values = &cf.values;
    let valid = model.predict(values) == Label::Pass;
    let mut minimality = 0;
    if valid {
        let mut probe = values.clone();
        for j in (0..p).filter(|&j| x[j] != values[j]) {
            probe[j] = x[j];
            if model.predict(&probe) == Label::Pass {
                minimality += 1;
            }
            probe[j] = values[j];
        }
    }
    let nearest = nearest_among(values, train.rows().enumerate(), Metric::Gower, 1, ranges);
    Ok(QualityRecord {
        cell,
        request_id: cf.request_id,
        validity: valid as u8,
        proximity: ranges.gower_unchecked(x, values),
        sparsity: changed_features(x, values),
        minimality,
        plausibility: nearest[0].distance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub count: usize,
}

/// Quantile with linear interpolation between order statistics
/// (position `q × (n − 1)` in the sorted sample).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn spread(values: &[f64]) -> Result<Spread> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("no values to summarise".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(Spread {
        median: quantile(&v, 0.5),
        q1: quantile(&v, 0.25),
        q3: quantile(&v, 0.75),
        count: v.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub cell: CellId,
    pub metrics: BTreeMap<QualityMetric, Spread>,
}

impl CellSummary {
    pub fn get(&self, metric: QualityMetric) -> Spread {
        self.metrics[&metric]
    }
}

/// One summary per cell, in cell order.
pub fn aggregate(records: &[QualityRecord]) -> Result<Vec<CellSummary>> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no quality records to aggregate".into()));
    }
    let mut groups: BTreeMap<CellId, Vec<&QualityRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.cell).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(cell, rs)| {
            let metrics = QualityMetric::ALL
                .into_iter()
                .map(|m| {
                    let vals: Vec<f64> = rs.iter().map(|r| m.of(r)).collect();
                    spread(&vals).map(|s| (m, s))
                })
                .collect::<Result<_>>()?;
            Ok(CellSummary { cell, metrics })
        })
        .collect()
}

pub fn count_by_cell(cfs: &[(CellId, Counterfactual)]) -> BTreeMap<CellId, usize> {
    let mut counts = BTreeMap::new();
    for (cell, _) in cfs {
        *counts.entry(*cell).or_insert(0) += 1;
    }
    counts
}

/// Counts from quality records (one record per counterfactual).
pub fn count_records_by_cell(records: &[QualityRecord]) -> BTreeMap<CellId, usize> {
    let mut counts = BTreeMap::new();
    for r in records {
        *counts.entry(r.cell).or_insert(0) += 1;
    }
    counts
}

pub const RECORD_HEADER: &str =
    "balancing,tuning,method,request_id,validity,proximity,sparsity,minimality,plausibility";

pub fn record_line(r: &QualityRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{}",
        r.cell.balancing,
        r.cell.tuning,
        r.cell.method,
        r.request_id,
        r.validity,
        r.proximity,
        r.sparsity,
        r.minimality,
        r.plausibility
    )
}

pub fn records_to_csv(records: &[QualityRecord]) -> String {
    let mut out = String::from(RECORD_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&record_line(r));
        out.push('\n');
    }
    out
}

pub fn write_records(path: &Path, records: &[QualityRecord]) -> Result<()> {
    write_file(path, &records_to_csv(records))
}

pub fn read_records(path: &Path) -> Result<Vec<QualityRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let bad = |column: &str| Error::BadCell {
            path: path.into(),
            row: i + 1,
            column: column.into(),
            value: rec.iter().collect::<Vec<_>>().join(","),
        };
        if rec.len() != 9 {
            return Err(bad("*"));
        }
        let cell: CellId = format!("{}:{}:{}", &rec[0], &rec[1], &rec[2])
            .parse()
            .map_err(|_| bad("cell"))?;
        out.push(QualityRecord {
            cell,
            request_id: rec[3].parse().map_err(|_| bad("request_id"))?,
            validity: rec[4].parse().map_err(|_| bad("validity"))?,
            proximity: rec[5].parse().map_err(|_| bad("proximity"))?,
            sparsity: rec[6].parse().map_err(|_| bad("sparsity"))?,
            minimality: rec[7].parse().map_err(|_| bad("minimality"))?,
            plausibility: rec[8].parse().map_err(|_| bad("plausibility"))?,
        });
    }
    Ok(out)
}

pub fn summaries_to_csv(summaries: &[CellSummary]) -> String {
    let mut out = String::from("balancing,tuning,method,metric,median,q1,q3,count\n");
    for s in summaries {
        for (m, v) in &s.metrics {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                s.cell.balancing,
                s.cell.tuning,
                s.cell.method,
                m.as_str(),
                v.median,
                v.q1,
                v.q3,
                v.count
            ));
        }
    }
    out
}

pub fn write_summaries(path: &Path, summaries: &[CellSummary]) -> Result<()> {
    write_file(path, &summaries_to_csv(summaries))
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(contents.as_bytes()).map_err(|e| Error::io(path, e))
}
