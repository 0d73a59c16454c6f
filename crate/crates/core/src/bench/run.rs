//! Grid execution, resumption and re-aggregation.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::experiment::{Experiment, FittedModel, RequestFailure};
use super::output::{
    counterfactuals_csv, counts_table, create_dir, meta_jsonl, performance_table, write_atomic,
    CELL_FILES, COUNTERFACTUALS_FILE, META_FILE, RECORDS_FILE,
};
use crate::balance::ClassWeights;
use crate::cell::{Balancing, CellId, ModelId, Tuning};
use crate::cfeval::{aggregate, read_records, records_to_csv, summaries_to_csv, QualityRecord};
use crate::cfgen::{CfRequest, Method};
use crate::dataset::imbalance_ratio;
use crate::error::{Error, Result};
use crate::forest::{read_model, write_model, EvalMetrics, Hyperparams};

pub const MANIFEST_FILE: &str = "manifest.json";
const PERFORMANCE_FILE: &str = "performance.csv";
const COUNTS_FILE: &str = "counts.csv";
const SUMMARIES_FILE: &str = "cell_summaries.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Pending,
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub seed: u64,
    pub train_rows: usize,
    pub test_rows: usize,
    pub train_fail: usize,
    pub train_pass: usize,
    pub test_fail: usize,
    pub test_pass: usize,
    pub test_imbalance_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub balancing: Balancing,
    pub tuning: Tuning,
    pub hyperparams: Hyperparams,
    pub class_weights: ClassWeights,
    pub train_rows: usize,
    pub metrics: EvalMetrics,
    /// Mean CV score per grid point (tuned models only).
    pub tune_scores: Option<Vec<f64>>,
    /// Test rows predicted fail, before the cap.
    pub predicted_fail: usize,
    /// Requests explained per cell (after the cap).
    pub explained: usize,
    pub file: PathBuf,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub request_id: usize,
    pub message: String,
}

impl From<RequestFailure> for FailureRecord {
    fn from(f: RequestFailure) -> Self {
        FailureRecord {
            request_id: f.request_id,
            message: f.message,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub cell: CellId,
    pub status: CellStatus,
    pub error: Option<String>,
    pub requests: usize,
    pub counterfactuals: usize,
    pub failed_requests: Vec<FailureRecord>,
    pub seconds: f64,
    /// Paths relative to the run directory.
    pub files: Vec<PathBuf>,
}

impl CellRecord {
    fn pending(cell: CellId) -> Self {
        CellRecord {
            cell,
            status: CellStatus::Pending,
            error: None,
            requests: 0,
            counterfactuals: 0,
            failed_requests: Vec::new(),
            seconds: 0.0,
            files: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub split: Option<SplitInfo>,
    pub models: Vec<ModelRecord>,
    /// One entry per configured cell, in grid order.
    pub cells: Vec<CellRecord>,
    /// Cells computed in this invocation (the rest were resumed).
    pub computed_cells: Vec<CellId>,
    /// Run-level files, relative to the run directory.
    pub artifacts: Vec<PathBuf>,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    fn save(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serialises");
        write_atomic(&dir.join(MANIFEST_FILE), &text)
    }

    pub fn cell(&self, cell: CellId) -> Option<&CellRecord> {
        self.cells.iter().find(|c| c.cell == cell)
    }
}

fn cell_dir(out: &Path, cell: CellId) -> PathBuf {
    out.join("cells").join(cell.slug())
}

fn model_file(id: ModelId) -> PathBuf {
    Path::new("models").join(format!("{}_{}.model", id.balancing, id.tuning))
}

/// Runs every configured cell, skipping cells a previous run with the same
/// configuration already completed.
pub fn run(cfg: &ExperimentConfig) -> Result<RunManifest> {
    let started = Instant::now();
    let out = cfg.run.output_dir.clone();
    create_dir(&out)?;
    create_dir(&out.join("models"))?;
    create_dir(&out.join("cells"))?;

    let hash = cfg.hash();
    let previous = match RunManifest::load(&out) {
        Ok(m) if m.config_hash == hash => Some(m),
        Ok(_) => {
            info!("configuration changed; recomputing every cell");
            None
        }
        Err(_) => None,
    };

    let exp = Experiment::prepare(cfg.clone())?;
    let (train_fail, train_pass) = exp.split.train.class_counts();
    let (test_fail, test_pass) = exp.split.test.class_counts();
    let mut manifest = RunManifest {
        config_hash: hash,
        config: cfg.clone(),
        split: Some(SplitInfo {
            seed: exp.split.seed,
            train_rows: exp.split.train.n_rows(),
            test_rows: exp.split.test.n_rows(),
            train_fail,
            train_pass,
            test_fail,
            test_pass,
            test_imbalance_ratio: imbalance_ratio(&exp.split.test)?,
        }),
        models: Vec::new(),
        cells: cfg.cells().into_iter().map(CellRecord::pending).collect(),
        computed_cells: Vec::new(),
        artifacts: Vec::new(),
        wall_clock_seconds: 0.0,
    };

    let mut records: BTreeMap<CellId, Vec<QualityRecord>> = BTreeMap::new();
    let mut metrics: BTreeMap<ModelId, EvalMetrics> = BTreeMap::new();
    let names = exp.data.names();

    for &balancing in &cfg.grid.balancing {
        for &tuning in &cfg.grid.tuning {
            let id = ModelId { balancing, tuning };
            let cells: Vec<CellId> = cfg
                .grid
                .methods
                .iter()
                .map(|&m| CellId::new(balancing, tuning, m))
                .collect();
            let mut pending = Vec::new();
            for &cell in &cells {
                match resume_cell(&out, previous.as_ref(), cell) {
                    Some((rec, recs)) => {
                        info!("{cell}: resumed");
                        records.insert(cell, recs);
                        set_cell(&mut manifest, rec);
                    }
                    None => pending.push(cell),
                }
            }

            let model_started = Instant::now();
            let fitted = match obtain_model(&exp, &out, previous.as_ref(), id) {
                Ok(f) => f,
                Err(e) => {
                    fail_cells(&mut manifest, &pending, &format!("model {id}: {e}"));
                    manifest.save(&out)?;
                    continue;
                }
            };
            let (model_record, requests) = match describe_model(&exp, &fitted, previous.as_ref(), model_started) {
                Ok(v) => v,
                Err(e) => {
                    fail_cells(&mut manifest, &pending, &format!("model {id}: {e}"));
                    manifest.save(&out)?;
                    continue;
                }
            };
            metrics.insert(id, model_record.metrics);
            manifest.models.push(model_record);

            for cell in pending {
                let cell_started = Instant::now();
                info!("{cell}: explaining {} instances", requests.len());
                let outcome = exp.run_cell(cell, &fitted, &requests);
                let dir = cell_dir(&out, cell);
                let mut rec = CellRecord::pending(cell);
                rec.requests = requests.len();
                rec.counterfactuals = outcome.counterfactuals.len();
                rec.failed_requests = outcome.failures.into_iter().map(Into::into).collect();
                let written = write_cell(
                    &dir,
                    &[
                        counterfactuals_csv(&names, &outcome.counterfactuals, &fitted.model),
                        meta_jsonl(&outcome.counterfactuals),
                        records_to_csv(&outcome.records),
                    ],
                );
                match written {
                    Ok(()) => {
                        rec.status = CellStatus::Completed;
                        rec.files = CELL_FILES
                            .iter()
                            .map(|f| Path::new("cells").join(cell.slug()).join(f))
                            .collect();
                        records.insert(cell, outcome.records);
                    }
                    Err(e) => {
                        rec.status = CellStatus::Failed;
                        rec.error = Some(e.to_string());
                    }
                }
                rec.seconds = cell_started.elapsed().as_secs_f64();
                info!(
                    "{cell}: {} counterfactuals, {} failed requests, {:.1}s",
                    rec.counterfactuals,
                    rec.failed_requests.len(),
                    rec.seconds
                );
                set_cell(&mut manifest, rec);
                manifest.computed_cells.push(cell);
                manifest.save(&out)?;
            }
        }
    }

    manifest.artifacts = write_aggregates(&out, cfg, &metrics, &manifest.cells, &records)?;
    manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    manifest.save(&out)?;
    Ok(manifest)
}

fn fail_cells(manifest: &mut RunManifest, cells: &[CellId], error: &str) {
    warn!("{error}");
    for &cell in cells {
        let mut rec = CellRecord::pending(cell);
        rec.status = CellStatus::Failed;
        rec.error = Some(error.to_string());
        set_cell(manifest, rec);
    }
}

fn set_cell(manifest: &mut RunManifest, rec: CellRecord) {
    let slot = manifest
        .cells
        .iter_mut()
        .find(|c| c.cell == rec.cell)
        .expect("cell is configured");
    *slot = rec;
}

/// A completed cell from the previous run whose files are all present.
fn resume_cell(out: &Path, previous: Option<&RunManifest>, cell: CellId) -> Option<(CellRecord, Vec<QualityRecord>)> {
    let rec = previous?.cell(cell)?;
    if rec.status != CellStatus::Completed || rec.files.is_empty() {
        return None;
    }
    if !rec.files.iter().all(|f| out.join(f).is_file()) {
        return None;
    }
    let records = read_records(&cell_dir(out, cell).join(RECORDS_FILE)).ok()?;
    Some((rec.clone(), records))
}

/// Loads the cached forest when the previous run recorded it, fitting
/// (and caching) it otherwise.
fn obtain_model(exp: &Experiment, out: &Path, previous: Option<&RunManifest>, id: ModelId) -> Result<FittedModel> {
    let file = model_file(id);
    let recorded = previous.is_some_and(|m| {
        m.models
            .iter()
            .any(|r| r.balancing == id.balancing && r.tuning == id.tuning && r.file == file)
    });
    if recorded {
        match read_model(&out.join(&file)) {
            Ok(model) => return exp.attach(id, model),
            Err(e) => warn!("{id}: cached model unusable ({e}); refitting"),
        }
    }
    info!("{id}: fitting");
    let fitted = exp.fit(id)?;
    let path = out.join(&file);
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    write_model(&fitted.model, Path::new(&tmp))?;
    fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
    Ok(fitted)
}

fn describe_model(
    exp: &Experiment,
    fitted: &FittedModel,
    previous: Option<&RunManifest>,
    started: Instant,
) -> Result<(ModelRecord, Vec<CfRequest>)> {
    let id = fitted.id;
    let metrics = exp.evaluate(&fitted.model)?;
    let predicted_fail = exp.predicted_fail_rows(&fitted.model).len();
    let requests = exp.requests(&fitted.model)?;
    let tune_scores = fitted.tune_scores.clone().or_else(|| {
        previous?
            .models
            .iter()
            .find(|r| r.balancing == id.balancing && r.tuning == id.tuning)?
            .tune_scores
            .clone()
    });
    let record = ModelRecord {
        balancing: id.balancing,
        tuning: id.tuning,
        hyperparams: fitted.model.hyperparams(),
        class_weights: fitted.model.class_weights(),
        train_rows: fitted.pool.n_rows(),
        metrics,
        tune_scores,
        predicted_fail,
        explained: requests.len(),
        file: model_file(id),
        seconds: started.elapsed().as_secs_f64(),
    };
    info!(
        "{id}: accuracy {:.4}, AUC {:.4}, F1 {:.4}; {} of {} predicted-fail test rows explained",
        metrics.accuracy, metrics.auc, metrics.f1, record.explained, predicted_fail
    );
    Ok((record, requests))
}

/// Writes the three cell files into a staging directory, then swaps it in.
fn write_cell(dir: &Path, contents: &[String; 3]) -> Result<()> {
    let parent = dir.parent().expect("cell dir has a parent");
    let name = dir.file_name().expect("cell dir has a name").to_string_lossy();
    let staging = parent.join(format!(".{name}.partial"));
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    }
    create_dir(&staging)?;
    for (file, text) in [COUNTERFACTUALS_FILE, META_FILE, RECORDS_FILE].iter().zip(contents) {
        let p = staging.join(file);
        fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
    }
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::rename(&staging, dir).map_err(|e| Error::io(dir, e))
}

fn write_aggregates(
    out: &Path,
    cfg: &ExperimentConfig,
    metrics: &BTreeMap<ModelId, EvalMetrics>,
    cells: &[CellRecord],
    records: &BTreeMap<CellId, Vec<QualityRecord>>,
) -> Result<Vec<PathBuf>> {
    let ordered: Vec<QualityRecord> = cells
        .iter()
        .filter_map(|c| records.get(&c.cell))
        .flatten()
        .cloned()
        .collect();
    let counts: BTreeMap<CellId, usize> = cells
        .iter()
        .filter(|c| c.status == CellStatus::Completed)
        .map(|c| (c.cell, records.get(&c.cell).map_or(0, Vec::len)))
        .collect();
    let summaries = if ordered.is_empty() {
        Vec::new()
    } else {
        aggregate(&ordered)?
    };
    let files = [
        (PERFORMANCE_FILE, performance_table(metrics, &cfg.grid.balancing)),
        (
            COUNTS_FILE,
            counts_table(&counts, &cfg.grid.balancing, &cfg.grid.tuning, &cfg.grid.methods),
        ),
        (RECORDS_FILE, records_to_csv(&ordered)),
        (SUMMARIES_FILE, summaries_to_csv(&summaries)),
    ];
    let mut written = Vec::new();
    for (name, text) in files {
        write_atomic(&out.join(name), &text)?;
        written.push(PathBuf::from(name));
    }
    Ok(written)
}

/// Rebuilds the run-level tables from the per-cell record files listed in
/// an existing manifest.
pub fn report(out: &Path) -> Result<RunManifest> {
    let mut manifest = RunManifest::load(out)?;
    let cfg = manifest.config.clone();
    let metrics: BTreeMap<ModelId, EvalMetrics> = manifest
        .models
        .iter()
        .map(|r| {
            (
                ModelId {
                    balancing: r.balancing,
                    tuning: r.tuning,
                },
                r.metrics,
            )
        })
        .collect();
    let mut records = BTreeMap::new();
    for c in manifest.cells.iter().filter(|c| c.status == CellStatus::Completed) {
        records.insert(c.cell, read_records(&cell_dir(out, c.cell).join(RECORDS_FILE))?);
    }
    manifest.artifacts = write_aggregates(out, &cfg, &metrics, &manifest.cells, &records)?;
    Ok(manifest)
}

/// Every method × cell count in the manifest, for quick inspection.
impl RunManifest {
    pub fn counts(&self) -> BTreeMap<CellId, usize> {
        self.cells
            .iter()
            .filter(|c| c.status == CellStatus::Completed)
            .map(|c| (c.cell, c.counterfactuals))
            .collect()
    }

    pub fn completed(&self) -> usize {
        self.cells.iter().filter(|c| c.status == CellStatus::Completed).count()
    }

    pub fn methods(&self) -> &[Method] {
        &self.config.grid.methods
    }
}
