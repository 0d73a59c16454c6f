//! Experiment configuration, read from TOML.
//!
//! Every section is optional except `[data]`; unknown keys are rejected.
//!
//! ```toml
//! [data]
//! frame = "ddd.csv"              # pre-ingested frame, or:
//! # oulad_dir = "raw/"           # raw OULAD directory
//! # course = "DDD"
//! # presentations = ["2013J", "2014J"]
//!
//! [split]
//! test_fraction = 0.3
//! # seed = 7                     # default: derived from master_seed
//!
//! [grid]
//! balancing = ["original", "undersampling", "oversampling", "smote", "cost_sensitive"]
//! tuning = ["vanilla", "tuned"]
//! methods = ["whatif", "moc", "nice_sp", "nice_pr"]
//!
//! [forest]
//! n_trees = 500
//!
//! [balance]
//! smote_k = 5
//!
//! [tune]
//! folds = 10
//! repeats = 3
//! objective = "auc"
//! # cv_trees = 100               # forest size during CV; default n_trees
//! mtry = [2, 6, 21, 41]
//! splitrule = ["gini", "extratrees"]
//! min_node_size = [1, 5, 10]
//!
//! [whatif]
//! k = 10
//!
//! [moc]
//! population = 100
//! generations = 50
//! mutation_rate = 0.3
//! crossover_rate = 0.7
//! penalize_invalid = true      # valid candidates outrank invalid ones
//!
//! [run]
//! master_seed = 42
//! max_explained_instances = 50   # or "unlimited"
//! output_dir = "out"
//! ```
//!
//! Relative paths are resolved against the directory of the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::balance::DEFAULT_SMOTE_K;
use crate::cell::{Balancing, CellId, Tuning};
use crate::cfgen::{Method, MocConfig, DEFAULT_WHATIF_K};
use crate::error::{Error, Result};
use crate::forest::{
    CvObjective, SplitRule, DEFAULT_MTRY, DEFAULT_NODE_SIZES, DEFAULT_SPLIT_RULES, DEFAULT_TREES,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub forest: ForestConfig,
    #[serde(default)]
    pub balance: BalanceConfig,
    #[serde(default)]
    pub tune: TuneConfig,
    #[serde(default)]
    pub whatif: WhatIfConfig,
    #[serde(default)]
    pub moc: MocSection,
    #[serde(default)]
    pub run: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSource {
    pub frame: Option<PathBuf>,
    pub oulad_dir: Option<PathBuf>,
    #[serde(default = "default_course")]
    pub course: String,
    #[serde(default = "default_presentations")]
    pub presentations: Vec<String>,
}

fn default_course() -> String {
    "DDD".into()
}

fn default_presentations() -> Vec<String> {
    vec!["2013J".into(), "2014J".into()]
}

impl DataSource {
    pub fn frame(path: impl Into<PathBuf>) -> Self {
        DataSource {
            frame: Some(path.into()),
            oulad_dir: None,
            course: default_course(),
            presentations: default_presentations(),
        }
    }

    pub fn oulad(dir: impl Into<PathBuf>) -> Self {
        DataSource {
            frame: None,
            oulad_dir: Some(dir.into()),
            course: default_course(),
            presentations: default_presentations(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    pub seed: Option<u64>,
}

fn default_test_fraction() -> f64 {
    0.3
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            test_fraction: default_test_fraction(),
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "all_balancing")]
    pub balancing: Vec<Balancing>,
    #[serde(default = "all_tuning")]
    pub tuning: Vec<Tuning>,
    #[serde(default = "all_methods")]
    pub methods: Vec<Method>,
}

fn all_balancing() -> Vec<Balancing> {
    Balancing::ALL.to_vec()
}

fn all_tuning() -> Vec<Tuning> {
    Tuning::ALL.to_vec()
}

fn all_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            balancing: all_balancing(),
            tuning: all_tuning(),
            methods: all_methods(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestConfig {
    #[serde(default = "default_trees")]
    pub n_trees: usize,
}

fn default_trees() -> usize {
    DEFAULT_TREES
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: DEFAULT_TREES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BalanceConfig {
    #[serde(default = "default_smote_k")]
    pub smote_k: usize,
}

fn default_smote_k() -> usize {
    DEFAULT_SMOTE_K
}

impl Default for BalanceConfig {
    fn default() -> Self {
        BalanceConfig {
            smote_k: DEFAULT_SMOTE_K,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneConfig {
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default = "default_objective")]
    pub objective: CvObjective,
    /// Forest size used while cross-validating; the winner is refitted
    /// with `forest.n_trees`.
    pub cv_trees: Option<usize>,
    #[serde(default = "default_mtry")]
    pub mtry: Vec<usize>,
    #[serde(default = "default_rules")]
    pub splitrule: Vec<SplitRule>,
    #[serde(default = "default_node_sizes")]
    pub min_node_size: Vec<usize>,
}

fn default_folds() -> usize {
    10
}

fn default_repeats() -> usize {
    3
}

fn default_objective() -> CvObjective {
    CvObjective::Auc
}

fn default_mtry() -> Vec<usize> {
    DEFAULT_MTRY.to_vec()
}

fn default_rules() -> Vec<SplitRule> {
    DEFAULT_SPLIT_RULES.to_vec()
}

fn default_node_sizes() -> Vec<usize> {
    DEFAULT_NODE_SIZES.to_vec()
}

impl Default for TuneConfig {
    fn default() -> Self {
        TuneConfig {
            folds: default_folds(),
            repeats: default_repeats(),
            objective: default_objective(),
            cv_trees: None,
            mtry: default_mtry(),
            splitrule: default_rules(),
            min_node_size: default_node_sizes(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhatIfConfig {
    #[serde(default = "default_whatif_k")]
    pub k: usize,
}

fn default_whatif_k() -> usize {
    DEFAULT_WHATIF_K
}

impl Default for WhatIfConfig {
    fn default() -> Self {
        WhatIfConfig {
            k: DEFAULT_WHATIF_K,
        }
    }
}

/// MOC settings; the per-request seed is derived from the master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MocSection {
    #[serde(default = "moc_population")]
    pub population: usize,
    #[serde(default = "moc_generations")]
    pub generations: usize,
    #[serde(default = "moc_mutation")]
    pub mutation_rate: f64,
    #[serde(default = "moc_crossover")]
    pub crossover_rate: f64,
    #[serde(default = "moc_penalize")]
    pub penalize_invalid: bool,
}

fn moc_population() -> usize {
    MocConfig::default().population
}

fn moc_generations() -> usize {
    MocConfig::default().generations
}

fn moc_mutation() -> f64 {
    MocConfig::default().mutation_rate
}

fn moc_crossover() -> f64 {
    MocConfig::default().crossover_rate
}

fn moc_penalize() -> bool {
    MocConfig::default().penalize_invalid
}

impl Default for MocSection {
    fn default() -> Self {
        let d = MocConfig::default();
        MocSection {
            population: d.population,
            generations: d.generations,
            mutation_rate: d.mutation_rate,
            crossover_rate: d.crossover_rate,
            penalize_invalid: d.penalize_invalid,
        }
    }
}

impl MocSection {
    pub fn with_seed(&self, seed: u64) -> MocConfig {
        MocConfig {
            population: self.population,
            generations: self.generations,
            mutation_rate: self.mutation_rate,
            crossover_rate: self.crossover_rate,
            penalize_invalid: self.penalize_invalid,
            seed,
        }
    }
}

/// Cap on explained instances per cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CapRepr", into = "CapRepr")]
pub enum InstanceCap {
    Limit(usize),
    Unlimited,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CapRepr {
    Number(usize),
    Word(String),
}

impl TryFrom<CapRepr> for InstanceCap {
    type Error = String;

    fn try_from(r: CapRepr) -> std::result::Result<Self, String> {
        match r {
            CapRepr::Number(0) => Err("max_explained_instances must be positive".into()),
            CapRepr::Number(n) => Ok(InstanceCap::Limit(n)),
            CapRepr::Word(w) if w == "unlimited" => Ok(InstanceCap::Unlimited),
            CapRepr::Word(w) => Err(format!(
                "max_explained_instances must be a positive integer or \"unlimited\", got {w:?}"
            )),
        }
    }
}

impl From<InstanceCap> for CapRepr {
    fn from(c: InstanceCap) -> Self {
        match c {
            InstanceCap::Limit(n) => CapRepr::Number(n),
            InstanceCap::Unlimited => CapRepr::Word("unlimited".into()),
        }
    }
}

impl InstanceCap {
    pub fn apply(self, n: usize) -> usize {
        match self {
            InstanceCap::Limit(cap) => n.min(cap),
            InstanceCap::Unlimited => n,
        }
    }
}

pub const DEFAULT_MAX_EXPLAINED: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_cap")]
    pub max_explained_instances: InstanceCap,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

fn default_cap() -> InstanceCap {
    InstanceCap::Limit(DEFAULT_MAX_EXPLAINED)
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            master_seed: 0,
            max_explained_instances: default_cap(),
            output_dir: default_output(),
        }
    }
}

impl ExperimentConfig {
    /// All defaults around the given data source.
    pub fn new(data: DataSource) -> Self {
        ExperimentConfig {
            data,
            split: SplitConfig::default(),
            grid: GridConfig::default(),
            forest: ForestConfig::default(),
            balance: BalanceConfig::default(),
            tune: TuneConfig::default(),
            whatif: WhatIfConfig::default(),
            moc: MocSection::default(),
            run: RunConfig::default(),
        }
    }

    /// Parses TOML; relative paths are resolved against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        };
        if let Some(p) = cfg.data.frame.as_mut() {
            resolve(p);
        }
        if let Some(p) = cfg.data.oulad_dir.as_mut() {
            resolve(p);
        }
        resolve(&mut cfg.run.output_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        match (&self.data.frame, &self.data.oulad_dir) {
            (Some(_), Some(_)) => return bad("set only one of data.frame and data.oulad_dir".into()),
            (None, None) => return bad("set data.frame or data.oulad_dir".into()),
            _ => {}
        }
        if self.data.oulad_dir.is_some() && self.data.presentations.is_empty() {
            return bad("data.presentations is empty".into());
        }
        if !(self.split.test_fraction > 0.0 && self.split.test_fraction < 1.0) {
            return bad(format!(
                "split.test_fraction must lie in (0, 1), got {}",
                self.split.test_fraction
            ));
        }
        if self.grid.balancing.is_empty() || self.grid.tuning.is_empty() || self.grid.methods.is_empty() {
            return bad("grid lists must be nonempty".into());
        }
        for (name, dup) in [
            ("balancing", has_duplicates(&self.grid.balancing)),
            ("tuning", has_duplicates(&self.grid.tuning)),
            ("methods", has_duplicates(&self.grid.methods)),
        ] {
            if dup {
                return bad(format!("grid.{name} lists a value twice"));
            }
        }
        if self.forest.n_trees == 0 {
            return bad("forest.n_trees must be positive".into());
        }
        if self.balance.smote_k == 0 {
            return bad("balance.smote_k must be positive".into());
        }
        let t = &self.tune;
        if t.folds < 2 || t.repeats == 0 || t.cv_trees == Some(0) {
            return bad("tune needs folds >= 2, repeats >= 1 and positive cv_trees".into());
        }
        if t.mtry.is_empty() || t.splitrule.is_empty() || t.min_node_size.is_empty() {
            return bad("tune grid lists must be nonempty".into());
        }
        if t.mtry.contains(&0) || t.min_node_size.contains(&0) {
            return bad("tune.mtry and tune.min_node_size values must be positive".into());
        }
        if self.whatif.k == 0 {
            return bad("whatif.k must be positive".into());
        }
        self.moc
            .with_seed(0)
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }

    /// Every configured cell, balancing slowest, then tuning, then method.
    pub fn cells(&self) -> Vec<CellId> {
        let mut out = Vec::new();
        for &b in &self.grid.balancing {
            for &t in &self.grid.tuning {
                for &m in &self.grid.methods {
                    out.push(CellId::new(b, t, m));
                }
            }
        }
        out
    }

    /// SHA-256 of the canonical TOML form, hex encoded. The output
    /// directory is excluded so a run can be relocated.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.run.output_dir = PathBuf::new();
        let digest = Sha256::digest(c.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn has_duplicates<T: PartialEq>(v: &[T]) -> bool {
    v.iter().enumerate().any(|(i, a)| v[..i].contains(a))
}
