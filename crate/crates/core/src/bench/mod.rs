//! Benchmark orchestration: the balancing × tuning × method grid.
//!
//! A run makes one stratified split, trains one forest per balancing ×
//! tuning pair, explains the test rows each forest predicts as fail and
//! scores every counterfactual. Output layout under the run directory:
//!
//! ```text
//! manifest.json
//! performance.csv        balancing,tuning,accuracy,auc,f1
//! counts.csv             one row per tuning × method, one column per balancing
//! quality_records.csv    every scored counterfactual
//! cell_summaries.csv     median / quartiles per cell and metric
//! models/<balancing>_<tuning>.model
//! cells/<balancing>_<tuning>_<method>/
//!     counterfactuals.csv
//!     meta.jsonl
//!     quality_records.csv
//! ```

mod config;
mod experiment;
mod output;
mod run;

use sha2::{Digest, Sha256};

pub use config::{
    BalanceConfig, DataSource, ExperimentConfig, ForestConfig, GridConfig, InstanceCap, MocSection,
    RunConfig, SplitConfig, TuneConfig, WhatIfConfig, DEFAULT_MAX_EXPLAINED,
};
pub use experiment::{CellOutcome, Experiment, FittedModel, RequestFailure};
pub use output::{counts_table, performance_table};
pub use run::{report, run, CellRecord, CellStatus, ModelRecord, RunManifest, SplitInfo, MANIFEST_FILE};

use crate::cell::{Balancing, CellId, ModelId};

/// Seed for one stage of one cell.
///
/// The seed is the first eight bytes (little endian) of
/// `SHA-256("cfbench-seed" 0 master 0 scope 0 stage)`, where `master` is
/// the decimal master seed and `scope` the cell name
/// `<balancing>:<tuning>:<method>`.
pub fn seed_for(master_seed: u64, cell: &CellId, stage: &str) -> u64 {
    derive_seed(master_seed, &cell.to_string(), stage)
}

/// Same construction with an arbitrary scope string.
pub fn derive_seed(master_seed: u64, scope: &str, stage: &str) -> u64 {
    let mut h = Sha256::new();
    for part in ["cfbench-seed", &master_seed.to_string(), scope, stage] {
        h.update(part.as_bytes());
        h.update([0u8]);
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("32-byte digest"))
}

pub(crate) fn model_seed(master_seed: u64, id: ModelId, stage: &str) -> u64 {
    derive_seed(master_seed, &id.to_string(), stage)
}

pub(crate) fn balancing_seed(master_seed: u64, b: Balancing, stage: &str) -> u64 {
    derive_seed(master_seed, b.as_str(), stage)
}
