//! OULAD ingestion: weekly click totals per student for one course.
//!
//! Day `d` of the VLE log (relative to the presentation start) falls in
//! week `floor(d / 7)`. Weeks −4 through 37 are kept, i.e. days −28..=265;
//! anything outside that window is discarded.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::path::Path;

use log::{info, warn};
use serde::Serialize;

use super::{Label, LabeledDataset};
use crate::error::{Error, Result};

pub const FIRST_WEEK: i64 = -4;
pub const LAST_WEEK: i64 = 37;

const STUDENT_INFO: &str = "studentInfo.csv";
const STUDENT_VLE: &str = "studentVle.csv";
const VLE: &str = "vle.csv";

/// `week_minus4, …, week_minus1, week_0, …, week_37`.
pub fn week_column_names() -> Vec<String> {
    (FIRST_WEEK..=LAST_WEEK)
        .map(|w| {
            if w < 0 {
                format!("week_minus{}", -w)
            } else {
                format!("week_{w}")
            }
        })
        .collect()
}

/// Column offset of the week holding `day`, or `None` outside the window.
pub fn week_of_day(day: i64) -> Option<usize> {
    let week = day.div_euclid(7);
    (FIRST_WEEK..=LAST_WEEK)
        .contains(&week)
        .then(|| (week - FIRST_WEEK) as usize)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    /// Student rows for the selected course and presentations.
    pub enrolled: usize,
    pub withdrawn: usize,
    /// Enrolled students whose final result is blank or unrecognised.
    pub missing_result: usize,
    /// Students present in the click log but not in student info.
    pub orphan_interactions: usize,
    /// Click-log rows dated outside the week window.
    pub clicks_outside_window: u64,
    pub kept: usize,
    pub pass: usize,
    pub fail: usize,
}

#[derive(Debug, Clone)]
pub struct OuladFrame {
    pub data: LabeledDataset,
    pub student_ids: Vec<String>,
    pub report: IngestReport,
}

impl OuladFrame {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.data.write_csv_with_ids(path, Some(&self.student_ids))
    }
}

struct Columns<'a> {
    path: &'a Path,
    index: HashMap<String, usize>,
}

impl<'a> Columns<'a> {
    fn new(path: &'a Path, headers: &csv::ByteRecord) -> Self {
        let index = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (String::from_utf8_lossy(h).trim().to_string(), i))
            .collect();
        Columns { path, index }
    }

    fn get(&self, name: &str) -> Result<usize> {
        self.index.get(name).copied().ok_or_else(|| Error::MissingColumn {
            path: self.path.into(),
            column: name.into(),
        })
    }
}

fn open(dir: &Path, name: &str) -> Result<(csv::Reader<File>, std::path::PathBuf)> {
    let path = dir.join(name);
    if !path.is_file() {
        return Err(Error::Oulad(format!("missing raw file {}", path.display())));
    }
    let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
    Ok((csv::Reader::from_reader(file), path))
}

fn text(record: &csv::ByteRecord, i: usize) -> &str {
    std::str::from_utf8(record.get(i).unwrap_or(b"")).unwrap_or("").trim()
}

/// Builds the weekly click frame for `course` restricted to `presentations`.
///
/// Distinction merges into pass, withdrawn students are dropped, and
/// students without any logged click get all-zero weeks.
pub fn ingest_oulad(raw_dir: &Path, course: &str, presentations: &[&str]) -> Result<OuladFrame> {
    // vle.csv is not needed for the aggregation but its absence means the
    // directory is not a complete OULAD export.
    if !raw_dir.join(VLE).is_file() {
        return Err(Error::Oulad(format!(
            "missing raw file {}",
            raw_dir.join(VLE).display()
        )));
    }
    let wanted: HashSet<&str> = presentations.iter().copied().collect();
    let mut report = IngestReport::default();

    let (mut reader, path) = open(raw_dir, STUDENT_INFO)?;
    let headers = reader.byte_headers().map_err(|e| Error::csv(&path, e))?.clone();
    let cols = Columns::new(&path, &headers);
    let (c_mod, c_pres, c_id, c_res) = (
        cols.get("code_module")?,
        cols.get("code_presentation")?,
        cols.get("id_student")?,
        cols.get("final_result")?,
    );

    // (presentation, id) -> row slot; None for enrolled-but-dropped students.
    let mut slots: HashMap<(String, String), Option<usize>> = HashMap::new();
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut record = csv::ByteRecord::new();
    while reader.read_byte_record(&mut record).map_err(|e| Error::csv(&path, e))? {
        if text(&record, c_mod) != course || !wanted.contains(text(&record, c_pres)) {
            continue;
        }
        report.enrolled += 1;
        let key = (text(&record, c_pres).to_string(), text(&record, c_id).to_string());
        let label = match text(&record, c_res) {
            "Pass" | "Distinction" => Some(Label::Pass),
            "Fail" => Some(Label::Fail),
            "Withdrawn" => {
                report.withdrawn += 1;
                None
            }
            _ => {
                report.missing_result += 1;
                None
            }
        };
        let slot = label.map(|l| {
            ids.push(key.1.clone());
            labels.push(l);
            labels.len() - 1
        });
        slots.insert(key, slot);
    }
    if report.enrolled == 0 {
        return Err(Error::Oulad(format!(
            "course {course} with presentations {presentations:?} not found in {}",
            path.display()
        )));
    }
    let found: HashSet<&str> = slots.keys().map(|(p, _)| p.as_str()).collect();
    if let Some(p) = presentations.iter().find(|p| !found.contains(*p)) {
        return Err(Error::Oulad(format!("presentation {course}/{p} not found")));
    }
    if labels.is_empty() {
        return Err(Error::Oulad("no students left after exclusions".into()));
    }

    let n_weeks = (LAST_WEEK - FIRST_WEEK + 1) as usize;
    let mut clicks = vec![0.0f64; labels.len() * n_weeks];
    let mut orphans: HashSet<(String, String)> = HashSet::new();

    let (mut reader, path) = open(raw_dir, STUDENT_VLE)?;
    let headers = reader.byte_headers().map_err(|e| Error::csv(&path, e))?.clone();
    let cols = Columns::new(&path, &headers);
    let (c_mod, c_pres, c_id, c_date, c_clicks) = (
        cols.get("code_module")?,
        cols.get("code_presentation")?,
        cols.get("id_student")?,
        cols.get("date")?,
        cols.get("sum_click")?,
    );
    let mut line = 0usize;
    while reader.read_byte_record(&mut record).map_err(|e| Error::csv(&path, e))? {
        line += 1;
        if text(&record, c_mod) != course || !wanted.contains(text(&record, c_pres)) {
            continue;
        }
        let key = (text(&record, c_pres).to_string(), text(&record, c_id).to_string());
        let slot = match slots.get(&key) {
            Some(Some(slot)) => *slot,
            Some(None) => continue,
            None => {
                orphans.insert(key);
                continue;
            }
        };
        let parse = |c: usize, name: &str| -> Result<f64> {
            text(&record, c).parse::<f64>().map_err(|_| Error::BadCell {
                path: path.clone(),
                row: line,
                column: name.into(),
                value: text(&record, c).into(),
            })
        };
        let day = parse(c_date, "date")?;
        let n = parse(c_clicks, "sum_click")?;
        match week_of_day(day.floor() as i64) {
            Some(w) => clicks[slot * n_weeks + w] += n,
            None => report.clicks_outside_window += 1,
        }
    }
    report.orphan_interactions = orphans.len();
    if report.orphan_interactions > 0 {
        warn!(
            "dropped {} students with interactions but no final result",
            report.orphan_interactions
        );
    }

    let data = LabeledDataset::new(clicks, labels, week_column_names())?;
    let (fail, pass) = data.class_counts();
    report.kept = data.n_rows();
    report.fail = fail;
    report.pass = pass;
    info!(
        "ingested {course} {presentations:?}: {} enrolled, {} withdrawn, {} kept ({} pass / {} fail)",
        report.enrolled, report.withdrawn, report.kept, pass, fail
    );
    Ok(OuladFrame {
        data,
        student_ids: ids,
        report,
    })
}
