//! CSV/JSON writers for run artifacts. Every file is written to a
//! temporary sibling and renamed into place.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::cell::{Balancing, CellId, ModelId, Tuning};
use crate::cfgen::{Counterfactual, GenerationMeta, Method};
use crate::dataset::{format_value, Label};
use crate::error::{Error, Result};
use crate::forest::{Classifier, EvalMetrics};

pub(crate) const COUNTERFACTUALS_FILE: &str = "counterfactuals.csv";
pub(crate) const META_FILE: &str = "meta.jsonl";
pub(crate) const RECORDS_FILE: &str = "quality_records.csv";
pub(crate) const CELL_FILES: [&str; 3] = [COUNTERFACTUALS_FILE, META_FILE, RECORDS_FILE];

pub(crate) fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    fs::write(tmp, contents).map_err(|e| Error::io(tmp, e))?;
    fs::rename(tmp, path).map_err(|e| Error::io(path, e))
}

pub(crate) fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// `request_id,method,<features...>,valid`.
pub(crate) fn counterfactuals_csv<M: Classifier + ?Sized>(
    names: &[String],
    cfs: &[Counterfactual],
    model: &M,
) -> String {
    let mut out = format!("request_id,method,{},valid\n", names.join(","));
    for cf in cfs {
        out.push_str(&format!("{},{}", cf.request_id, cf.method));
        for &v in &cf.values {
            out.push(',');
            out.push_str(&format_value(v));
        }
        let valid = model.predict(&cf.values) == Label::Pass;
        out.push_str(&format!(",{}\n", valid as u8));
    }
    out
}

#[derive(Serialize)]
struct MetaLine<'a> {
    request_id: usize,
    method: Method,
    meta: &'a GenerationMeta,
}

pub(crate) fn meta_jsonl(cfs: &[Counterfactual]) -> String {
    let mut out = String::new();
    for cf in cfs {
        let line = MetaLine {
            request_id: cf.request_id,
            method: cf.method,
            meta: &cf.meta,
        };
        out.push_str(&serde_json::to_string(&line).expect("meta serialises"));
        out.push('\n');
    }
    out
}

/// `balancing,tuning,accuracy,auc,f1`, vanilla block first, balancing in
/// the given order within each block.
pub fn performance_table(metrics: &BTreeMap<ModelId, EvalMetrics>, balancing: &[Balancing]) -> String {
    let mut out = String::from("balancing,tuning,accuracy,auc,f1\n");
    for t in Tuning::ALL {
        for &b in balancing {
            if let Some(m) = metrics.get(&ModelId { balancing: b, tuning: t }) {
                out.push_str(&format!("{b},{t},{},{},{}\n", m.accuracy, m.auc, m.f1));
            }
        }
    }
    out
}

/// Counterfactual counts laid out as `tuning,method,<one column per
/// balancing>`. Cells without a count (not run, or failed) are blank.
pub fn counts_table(
    counts: &BTreeMap<CellId, usize>,
    balancing: &[Balancing],
    tuning: &[Tuning],
    methods: &[Method],
) -> String {
    let cols: Vec<&str> = balancing.iter().map(|b| b.as_str()).collect();
    let mut out = format!("tuning,method,{}\n", cols.join(","));
    for &t in tuning {
        for &m in methods {
            out.push_str(&format!("{t},{m}"));
            for &b in balancing {
                out.push(',');
                if let Some(c) = counts.get(&CellId::new(b, t, m)) {
                    out.push_str(&c.to_string());
                }
            }
            out.push('\n');
        }
    }
    out
}
