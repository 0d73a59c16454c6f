//! Random forests of CART trees with class weights.
//!
//! Trees are grown independently, each on its own bootstrap sample and RNG
//! stream derived from `(seed, tree index)`, so fitting parallelises without
//! affecting the result.

mod format;
mod metrics;
mod tree;
mod tune;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::balance::ClassWeights;
use crate::dataset::{Label, LabeledDataset};
use crate::error::{Error, Result};
use crate::rng;

pub use format::{read_model, write_model};
pub use metrics::{accuracy, auc, evaluate, f1_fail, EvalMetrics};
pub use tree::{Node, Tree};
pub use tune::{
    default_grid, grid, stratified_folds, tune, tune_with_scores, CvObjective, CvSpec, TuneOutcome,
    DEFAULT_MTRY, DEFAULT_NODE_SIZES, DEFAULT_SPLIT_RULES,
};

use tree::{bootstrap, Grower, Impurity};

pub const DEFAULT_TREES: usize = 500;

/// Fail probability at or above this is labelled fail.
pub const THRESHOLD: f64 = 0.5;

/// Anything that scores the fail class. Labels follow [`THRESHOLD`], with
/// ties going to fail.
pub trait Classifier: Sync {
    fn n_features(&self) -> usize;

    fn proba_fail(&self, x: &[f64]) -> f64;

    fn proba_pass(&self, x: &[f64]) -> f64 {
        1.0 - self.proba_fail(x)
    }

    fn predict(&self, x: &[f64]) -> Label {
        if self.proba_fail(x) >= THRESHOLD {
            Label::Fail
        } else {
            Label::Pass
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitRule {
    Gini,
    ExtraTrees,
}

impl fmt::Display for SplitRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitRule::Gini => "gini",
            SplitRule::ExtraTrees => "extratrees",
        })
    }
}

impl FromStr for SplitRule {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "gini" => Ok(SplitRule::Gini),
            "extratrees" => Ok(SplitRule::ExtraTrees),
            _ => Err(format!("unknown split rule {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Hyperparams {
    pub mtry: usize,
    pub splitrule: SplitRule,
    pub min_node_size: usize,
    pub n_trees: usize,
}

impl Hyperparams {
    /// `mtry = floor(sqrt(p))`, gini, node size 1, 500 trees.
    pub fn defaults_for(p: usize) -> Self {
        Hyperparams {
            mtry: ((p as f64).sqrt().floor() as usize).max(1),
            splitrule: SplitRule::Gini,
            min_node_size: 1,
            n_trees: DEFAULT_TREES,
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.mtry == 0 || self.mtry > p {
            return Err(Error::InvalidArgument(format!(
                "mtry must lie in 1..={p}, got {}",
                self.mtry
            )));
        }
        if self.min_node_size == 0 {
            return Err(Error::InvalidArgument("min_node_size must be at least 1".into()));
        }
        if self.n_trees == 0 {
            return Err(Error::InvalidArgument("n_trees must be positive".into()));
        }
        Ok(())
    }
}

impl fmt::Display for Hyperparams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "mtry={} splitrule={} min_node_size={} n_trees={}",
            self.mtry, self.splitrule, self.min_node_size, self.n_trees
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForestModel {
    pub(crate) trees: Vec<Tree>,
    pub(crate) n_features: usize,
    pub(crate) hyperparams: Hyperparams,
    pub(crate) class_weights: ClassWeights,
    pub(crate) training_seed: u64,
}

impl RandomForestModel {
    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn hyperparams(&self) -> Hyperparams {
        self.hyperparams
    }

    pub fn class_weights(&self) -> ClassWeights {
        self.class_weights
    }

    pub fn training_seed(&self) -> u64 {
        self.training_seed
    }

    /// Mean fail probability across trees; checks the dimension.
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        Ok(self.proba_fail(x))
    }

    pub fn predict_label(&self, x: &[f64]) -> Result<Label> {
        self.predict_proba(x).map(|p| if p >= THRESHOLD { Label::Fail } else { Label::Pass })
    }
}

impl Classifier for RandomForestModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn proba_fail(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.proba_fail(x)).sum();
        sum / self.trees.len() as f64
    }
}

fn check_fit(train: &LabeledDataset, hp: &Hyperparams) -> Result<()> {
    if train.n_rows() == 0 {
        return Err(Error::InvalidData("empty training set".into()));
    }
    hp.validate(train.n_features())
}

pub fn fit_forest(
    train: &LabeledDataset,
    hp: &Hyperparams,
    weights: ClassWeights,
    seed: u64,
) -> Result<RandomForestModel> {
    fit_with_impurity(train, hp, weights, Impurity::for_weights(weights), seed)
}

pub(crate) fn fit_with_impurity(
    train: &LabeledDataset,
    hp: &Hyperparams,
    weights: ClassWeights,
    impurity: Impurity,
    seed: u64,
) -> Result<RandomForestModel> {
    check_fit(train, hp)?;
    let trees = (0..hp.n_trees)
        .into_par_iter()
        .map(|t| grow_one(train, hp, weights, impurity, seed, t).0)
        .collect();
    Ok(RandomForestModel {
        trees,
        n_features: train.n_features(),
        hyperparams: *hp,
        class_weights: weights,
        training_seed: seed,
    })
}

fn grow_one(
    train: &LabeledDataset,
    hp: &Hyperparams,
    weights: ClassWeights,
    impurity: Impurity,
    seed: u64,
    index: usize,
) -> (Tree, Vec<usize>) {
    let mut rng = rng::seeded(rng::mix(seed, index as u64));
    let sample = bootstrap(train, weights, &mut rng);
    let tree = Grower::new(train, hp, impurity).grow(sample.clone(), &mut rng);
    (tree, sample)
}

/// Fits through the class-weighted Gini code path even when the weights
/// are `(1, 1)`.
#[doc(hidden)]
pub fn fit_forest_weighted_path(
    train: &LabeledDataset,
    hp: &Hyperparams,
    weights: ClassWeights,
    seed: u64,
) -> Result<RandomForestModel> {
    fit_with_impurity(train, hp, weights, Impurity::Weighted(weights), seed)
}

/// Out-of-bag error rate after each added tree (same trees as
/// [`fit_forest`] with the same arguments). Entries before any row has an
/// out-of-bag vote are `NaN`.
pub fn oob_error_trace(
    train: &LabeledDataset,
    hp: &Hyperparams,
    weights: ClassWeights,
    seed: u64,
) -> Result<Vec<f64>> {
    check_fit(train, hp)?;
    let impurity = Impurity::for_weights(weights);
    let grown: Vec<(Tree, Vec<usize>)> = (0..hp.n_trees)
        .into_par_iter()
        .map(|t| grow_one(train, hp, weights, impurity, seed, t))
        .collect();
    let n = train.n_rows();
    let mut sum = vec![0.0; n];
    let mut votes = vec![0usize; n];
    let mut trace = Vec::with_capacity(grown.len());
    let mut in_bag = vec![false; n];
    for (tree, sample) in &grown {
        in_bag.iter_mut().for_each(|b| *b = false);
        for &i in sample {
            in_bag[i] = true;
        }
        for i in (0..n).filter(|&i| !in_bag[i]) {
            sum[i] += tree.proba_fail(train.row(i));
            votes[i] += 1;
        }
        let (mut wrong, mut seen) = (0usize, 0usize);
        for i in (0..n).filter(|&i| votes[i] > 0) {
            seen += 1;
            let predicted = if sum[i] / votes[i] as f64 >= THRESHOLD {
                Label::Fail
            } else {
                Label::Pass
            };
            if predicted != train.label(i) {
                wrong += 1;
            }
        }
        trace.push(if seen == 0 {
            f64::NAN
        } else {
            wrong as f64 / seen as f64
        });
    }
    Ok(trace)
}
