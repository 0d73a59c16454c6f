//! Grid search with stratified repeated k-fold cross-validation.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{evaluate, fit_forest, Hyperparams, SplitRule};
use crate::balance::ClassWeights;
use crate::dataset::{Label, LabeledDataset};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CvObjective {
    Auc,
    Accuracy,
    F1,
}

impl fmt::Display for CvObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CvObjective::Auc => "auc",
            CvObjective::Accuracy => "accuracy",
            CvObjective::F1 => "f1",
        })
    }
}

impl FromStr for CvObjective {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "auc" => Ok(CvObjective::Auc),
            "accuracy" => Ok(CvObjective::Accuracy),
            "f1" => Ok(CvObjective::F1),
            _ => Err(format!("unknown CV objective {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvSpec {
    pub folds: usize,
    pub repeats: usize,
    pub objective: CvObjective,
    pub seed: u64,
}

impl CvSpec {
    pub fn new(folds: usize, repeats: usize, objective: CvObjective, seed: u64) -> Result<Self> {
        if folds < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 folds, got {folds}")));
        }
        if repeats == 0 {
            return Err(Error::InvalidArgument("repeats must be positive".into()));
        }
        Ok(CvSpec {
            folds,
            repeats,
            objective,
            seed,
        })
    }
}

pub const DEFAULT_MTRY: [usize; 4] = [2, 6, 21, 41];
pub const DEFAULT_SPLIT_RULES: [SplitRule; 2] = [SplitRule::Gini, SplitRule::ExtraTrees];
pub const DEFAULT_NODE_SIZES: [usize; 3] = [1, 5, 10];

/// mtry ∈ {2, 6, 21, 41} (capped at `p`), both split rules, node sizes
/// {1, 5, 10}; mtry varies slowest.
pub fn default_grid(p: usize, n_trees: usize) -> Vec<Hyperparams> {
    grid(&DEFAULT_MTRY, &DEFAULT_SPLIT_RULES, &DEFAULT_NODE_SIZES, p, n_trees)
}

/// Cartesian grid in the given value orders, mtry slowest. mtry values are
/// capped at `p`; repeated values after capping are dropped.
pub fn grid(
    mtry: &[usize],
    rules: &[SplitRule],
    node_sizes: &[usize],
    p: usize,
    n_trees: usize,
) -> Vec<Hyperparams> {
    let mut mtries: Vec<usize> = Vec::new();
    for m in mtry.iter().map(|&m| m.min(p)) {
        if !mtries.contains(&m) {
            mtries.push(m);
        }
    }
    let mut out = Vec::new();
    for &mtry in &mtries {
        for &splitrule in rules {
            for &min_node_size in node_sizes {
                out.push(Hyperparams {
                    mtry,
                    splitrule,
                    min_node_size,
                    n_trees,
                });
            }
        }
    }
    out
}

/// Fold id per row: each class is shuffled and dealt round-robin.
pub fn stratified_folds(data: &LabeledDataset, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {folds}")));
    }
    let mut rng = rng::seeded(seed);
    let mut fold_of = vec![0usize; data.n_rows()];
    for label in [Label::Fail, Label::Pass] {
        let mut idx = data.indices_of(label);
        if idx.len() < folds {
            return Err(Error::InvalidArgument(format!(
                "class {label} has {} rows, fewer than {folds} folds",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        for (pos, &i) in idx.iter().enumerate() {
            fold_of[i] = pos % folds;
        }
    }
    Ok(fold_of)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneOutcome {
    pub best: Hyperparams,
    /// Mean CV objective per grid point, in grid order.
    pub scores: Vec<f64>,
}

pub fn tune(
    train: &LabeledDataset,
    grid: &[Hyperparams],
    cv: &CvSpec,
    weights: ClassWeights,
) -> Result<Hyperparams> {
    tune_with_scores(train, grid, cv, weights).map(|o| o.best)
}

/// Picks the grid point with the highest mean objective across all
/// folds × repeats; ties go to the earlier grid point. Every grid point
/// sees the same folds and per-fold fitting seeds.
pub fn tune_with_scores(
    train: &LabeledDataset,
    grid: &[Hyperparams],
    cv: &CvSpec,
    weights: ClassWeights,
) -> Result<TuneOutcome> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("tuning grid is empty".into()));
    }
    for hp in grid {
        hp.validate(train.n_features())?;
    }
    let mut splits = Vec::with_capacity(cv.folds * cv.repeats);
    for r in 0..cv.repeats {
        let fold_of = stratified_folds(train, cv.folds, rng::mix(cv.seed, r as u64))?;
        for f in 0..cv.folds {
            let (held, kept): (Vec<usize>, Vec<usize>) =
                (0..train.n_rows()).partition(|&i| fold_of[i] == f);
            let fit_seed = rng::mix(cv.seed ^ 0xF01D, (r * cv.folds + f) as u64);
            splits.push((train.select(&kept)?, train.select(&held)?, fit_seed));
        }
    }
    let mut scores = Vec::with_capacity(grid.len());
    for hp in grid {
        let mut total = 0.0;
        for (fit, held, seed) in &splits {
            let model = fit_forest(fit, hp, weights, *seed)?;
            let m = evaluate(&model, held)?;
            total += match cv.objective {
                CvObjective::Auc => m.auc,
                CvObjective::Accuracy => m.accuracy,
                CvObjective::F1 => m.f1,
            };
        }
        scores.push(total / splits.len() as f64);
    }
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    Ok(TuneOutcome {
        best: grid[best],
        scores,
    })
}
