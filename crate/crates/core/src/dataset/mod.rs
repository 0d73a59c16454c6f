//! Tabular frames with binary fail/pass labels.
//!
//! A [`LabeledDataset`] is immutable once built. Per-feature observed ranges
//! are always recomputed from the stored values, so every subset or
//! resampled copy carries specs that cover exactly what it holds.

mod oulad;

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub use oulad::{ingest_oulad, week_column_names, week_of_day, IngestReport, OuladFrame};

/// Column holding the target in frame CSVs.
pub const LABEL_COLUMN: &str = "final_result";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Fail,
    Pass,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Fail => "fail",
            Label::Pass => "pass",
        }
    }

    pub fn other(self) -> Label {
        match self {
            Label::Fail => Label::Pass,
            Label::Pass => Label::Fail,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "fail" => Ok(Label::Fail),
            "pass" => Ok(Label::Pass),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

impl FeatureSpec {
    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    pub fn is_constant(&self) -> bool {
        self.max == self.min
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    values: Vec<f64>,
    labels: Vec<Label>,
    specs: Vec<FeatureSpec>,
}

impl LabeledDataset {
    /// Builds a dataset from a row-major value buffer.
    pub fn new(values: Vec<f64>, labels: Vec<Label>, names: Vec<String>) -> Result<Self> {
        let p = names.len();
        let n = labels.len();
        if n == 0 {
            return Err(Error::InvalidData("dataset has no rows".into()));
        }
        if p == 0 {
            return Err(Error::InvalidData("dataset has no features".into()));
        }
        if values.len() != n * p {
            return Err(Error::InvalidData(format!(
                "value buffer holds {} cells, expected {n} x {p}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("non-finite value {v}")));
        }
        let specs = compute_specs(&values, p, names);
        Ok(LabeledDataset {
            values,
            labels,
            specs,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<Label>, names: Vec<String>) -> Result<Self> {
        let p = names.len();
        if let Some(r) = rows.iter().find(|r| r.len() != p) {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: r.len(),
            });
        }
        if rows.len() != labels.len() {
            return Err(Error::InvalidData(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        Self::new(rows.concat(), labels, names)
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.specs.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_features();
        &self.values[i * p..(i + 1) * p]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.n_features())
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_features() + j]
    }

    pub fn label(&self, i: usize) -> Label {
        self.labels[i]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn specs(&self) -> &[FeatureSpec] {
        &self.specs
    }

    pub fn names(&self) -> Vec<String> {
        self.specs.iter().map(|s| s.name.clone()).collect()
    }

    /// Returns `(fail, pass)` row counts.
    pub fn class_counts(&self) -> (usize, usize) {
        let fail = self.labels.iter().filter(|&&l| l == Label::Fail).count();
        (fail, self.labels.len() - fail)
    }

    pub fn count(&self, label: Label) -> usize {
        let (fail, pass) = self.class_counts();
        match label {
            Label::Fail => fail,
            Label::Pass => pass,
        }
    }

    /// Row indices of one class, in row order.
    pub fn indices_of(&self, label: Label) -> Vec<usize> {
        (0..self.n_rows()).filter(|&i| self.labels[i] == label).collect()
    }

    /// Copies the given rows (duplicates allowed) into a new dataset.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let p = self.n_features();
        let mut values = Vec::with_capacity(indices.len() * p);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            values.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self::new(values, labels, self.names())
    }

    /// Appends extra rows, e.g. synthetic minority instances.
    pub fn with_extra_rows(&self, rows: &[Vec<f64>], labels: &[Label]) -> Result<Self> {
        let mut values = self.values.clone();
        for r in rows {
            if r.len() != self.n_features() {
                return Err(Error::DimensionMismatch {
                    expected: self.n_features(),
                    got: r.len(),
                });
            }
            values.extend_from_slice(r);
        }
        let mut all_labels = self.labels.clone();
        all_labels.extend_from_slice(labels);
        Self::new(values, all_labels, self.names())
    }

    /// Majority and minority labels. Ties resolve to pass as majority.
    pub fn majority_minority(&self) -> Result<(Label, Label)> {
        let (fail, pass) = self.class_counts();
        if fail == 0 {
            return Err(Error::ClassAbsent(Label::Fail));
        }
        if pass == 0 {
            return Err(Error::ClassAbsent(Label::Pass));
        }
        Ok(if fail > pass {
            (Label::Fail, Label::Pass)
        } else {
            (Label::Pass, Label::Fail)
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.write_csv_with_ids(path, None)
    }

    /// Writes the frame with an optional leading `student_id` column.
    pub fn write_csv_with_ids(&self, path: &Path, ids: Option<&[String]>) -> Result<()> {
        let mut out = String::new();
        let mut header: Vec<&str> = Vec::new();
        if ids.is_some() {
            header.push("student_id");
        }
        header.extend(self.specs.iter().map(|s| s.name.as_str()));
        header.push(LABEL_COLUMN);
        out.push_str(&header.join(","));
        out.push('\n');
        for (i, row) in self.rows().enumerate() {
            if let Some(ids) = ids {
                out.push_str(&ids[i]);
                out.push(',');
            }
            for v in row {
                out.push_str(&format_value(*v));
                out.push(',');
            }
            out.push_str(self.labels[i].as_str());
            out.push('\n');
        }
        let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

fn compute_specs(values: &[f64], p: usize, names: Vec<String>) -> Vec<FeatureSpec> {
    let mut specs: Vec<FeatureSpec> = names
        .into_iter()
        .map(|name| FeatureSpec {
            name,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        })
        .collect();
    for row in values.chunks_exact(p) {
        for (spec, &v) in specs.iter_mut().zip(row) {
            spec.min = spec.min.min(v);
            spec.max = spec.max.max(v);
        }
    }
    specs
}

/// Shortest round-trip formatting; integral values print without a fraction.
pub fn format_value(v: f64) -> String {
    format!("{v}")
}

/// Loads a frame CSV. `expected_columns` are the feature columns, in the
/// order they should appear in the dataset; other columns are ignored.
/// The label column is [`LABEL_COLUMN`].
pub fn load_csv(path: &Path, expected_columns: &[&str]) -> Result<LabeledDataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::EmptyFile { path: path.into() });
    }
    let position: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let find = |name: &str| {
        position.get(name).copied().ok_or_else(|| Error::MissingColumn {
            path: path.into(),
            column: name.to_string(),
        })
    };
    let feature_cols = expected_columns
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>>>()?;
    let label_col = find(LABEL_COLUMN)?;

    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (r, record) in reader.records().enumerate() {
        // 1-based data row numbering, header excluded.
        let row = r + 1;
        let record = record.map_err(|e| Error::csv(path, e))?;
        for (&c, &name) in feature_cols.iter().zip(expected_columns) {
            let cell = record.get(c).unwrap_or("");
            let v: f64 = cell.trim().parse().map_err(|_| Error::BadCell {
                path: path.into(),
                row,
                column: name.to_string(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::BadCell {
                    path: path.into(),
                    row,
                    column: name.to_string(),
                    value: cell.to_string(),
                });
            }
            values.push(v);
        }
        let cell = record.get(label_col).unwrap_or("");
        let label = cell.parse::<Label>().map_err(|_| Error::BadCell {
            path: path.into(),
            row,
            column: LABEL_COLUMN.to_string(),
            value: cell.to_string(),
        })?;
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(Error::EmptyFile { path: path.into() });
    }
    LabeledDataset::new(
        values,
        labels,
        expected_columns.iter().map(|s| s.to_string()).collect(),
    )
}

/// Reads a frame CSV whose feature columns are every column other than
/// `student_id` and the label, in file order.
pub fn load_frame_csv(path: &Path) -> Result<LabeledDataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let cols: Vec<String> = headers
        .iter()
        .filter(|h| *h != "student_id" && *h != LABEL_COLUMN && !h.is_empty())
        .map(str::to_string)
        .collect();
    if cols.is_empty() {
        return Err(Error::EmptyFile { path: path.into() });
    }
    let refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    load_csv(path, &refs)
}

/// Majority count over minority count.
pub fn imbalance_ratio(data: &LabeledDataset) -> Result<f64> {
    let (majority, minority) = data.majority_minority()?;
    Ok(data.count(majority) as f64 / data.count(minority) as f64)
}

#[derive(Debug, Clone)]
pub struct SplitResult {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    /// Input row indices that went to each part, in row order.
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub seed: u64,
}

/// Seeded stratified split. Each class sends `round(fraction × size)` rows
/// to the test part, kept within `[1, size − 1]` so both parts see both
/// classes.
pub fn stratified_split(data: &LabeledDataset, test_fraction: f64, seed: u64) -> Result<SplitResult> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let mut rng = rng::seeded(seed);
    let mut is_test = vec![false; data.n_rows()];
    for label in [Label::Fail, Label::Pass] {
        let mut idx = data.indices_of(label);
        if idx.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "class {label} has {} members, at least 2 required",
                idx.len()
            )));
        }
        let take = ((test_fraction * idx.len() as f64).round() as usize).clamp(1, idx.len() - 1);
        idx.shuffle(&mut rng);
        for &i in &idx[..take] {
            is_test[i] = true;
        }
    }
    let (test_indices, train_indices): (Vec<usize>, Vec<usize>) =
        (0..data.n_rows()).partition(|&i| is_test[i]);
    Ok(SplitResult {
        train: data.select(&train_indices)?,
        test: data.select(&test_indices)?,
        train_indices,
        test_indices,
        seed,
    })
}
