//! The per-run state shared by every cell: data, split and range table.

use log::info;
use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::{balancing_seed, derive_seed, model_seed, seed_for};
use crate::balance::{cost_weights, random_oversample, random_undersample, smote, ClassWeights};
use crate::cell::{Balancing, CellId, ModelId, Tuning};
use crate::cfeval::{score, QualityRecord};
use crate::cfgen::{moc, nice, whatif, CfRequest, Counterfactual, Method, NiceReward};
use crate::dataset::{ingest_oulad, load_frame_csv, stratified_split, Label, LabeledDataset, SplitResult};
use crate::distance::RangeTable;
use crate::error::{Error, Result};
use crate::forest::{
    evaluate, fit_forest, grid, tune_with_scores, Classifier, CvSpec, EvalMetrics, Hyperparams,
    RandomForestModel,
};

pub struct Experiment {
    pub cfg: ExperimentConfig,
    pub data: LabeledDataset,
    pub split: SplitResult,
    /// Ranges of the original training split, used for every distance.
    pub ranges: RangeTable,
}

/// A trained forest with the training set it was fitted on, which also
/// serves as the counterfactual pool.
pub struct FittedModel {
    pub id: ModelId,
    pub model: RandomForestModel,
    pub pool: LabeledDataset,
    /// Mean CV score per grid point, for tuned models fitted in this process.
    pub tune_scores: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RequestFailure {
    pub request_id: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct CellOutcome {
    pub counterfactuals: Vec<Counterfactual>,
    pub records: Vec<QualityRecord>,
    pub failures: Vec<RequestFailure>,
}

impl Experiment {
    pub fn prepare(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let data = load_data(&cfg)?;
        let seed = cfg
            .split
            .seed
            .unwrap_or_else(|| derive_seed(cfg.run.master_seed, "data", "split"));
        let split = stratified_split(&data, cfg.split.test_fraction, seed)?;
        let ranges = RangeTable::from_dataset(&split.train);
        info!(
            "split: {} train rows, {} test rows (seed {seed})",
            split.train.n_rows(),
            split.test.n_rows()
        );
        Ok(Experiment {
            cfg,
            data,
            split,
            ranges,
        })
    }

    /// Training rows and class weights for one balancing strategy. Only the
    /// cost-sensitive strategy has non-unit weights.
    pub fn training_set(&self, b: Balancing) -> Result<(LabeledDataset, ClassWeights)> {
        let train = &self.split.train;
        let seed = balancing_seed(self.cfg.run.master_seed, b, "balance");
        Ok(match b {
            Balancing::Original => (train.clone(), ClassWeights::UNIT),
            Balancing::Undersampling => (random_undersample(train, seed)?, ClassWeights::UNIT),
            Balancing::Oversampling => (random_oversample(train, seed)?, ClassWeights::UNIT),
            Balancing::Smote => (smote(train, self.cfg.balance.smote_k, seed)?, ClassWeights::UNIT),
            Balancing::CostSensitive => (train.clone(), cost_weights(train)?),
        })
    }

    pub fn vanilla_hyperparams(&self) -> Hyperparams {
        Hyperparams {
            n_trees: self.cfg.forest.n_trees,
            ..Hyperparams::defaults_for(self.data.n_features())
        }
    }

    /// Balances, optionally tunes, and fits the forest for `id`.
    pub fn fit(&self, id: ModelId) -> Result<FittedModel> {
        let (pool, weights) = self.training_set(id.balancing)?;
        let (hp, tune_scores) = match id.tuning {
            Tuning::Vanilla => (self.vanilla_hyperparams(), None),
            Tuning::Tuned => {
                let t = &self.cfg.tune;
                let cv_trees = t.cv_trees.unwrap_or(self.cfg.forest.n_trees);
                let points = grid(&t.mtry, &t.splitrule, &t.min_node_size, pool.n_features(), cv_trees);
                let cv = CvSpec::new(
                    t.folds,
                    t.repeats,
                    t.objective,
                    model_seed(self.cfg.run.master_seed, id, "cv"),
                )?;
                let outcome = tune_with_scores(&pool, &points, &cv, weights)?;
                info!("{id}: tuned to {}", outcome.best);
                let best = Hyperparams {
                    n_trees: self.cfg.forest.n_trees,
                    ..outcome.best
                };
                (best, Some(outcome.scores))
            }
        };
        let model = fit_forest(&pool, &hp, weights, model_seed(self.cfg.run.master_seed, id, "fit"))?;
        Ok(FittedModel {
            id,
            model,
            pool,
            tune_scores,
        })
    }

    /// Pairs a previously fitted forest with its (re-derived) pool.
    pub fn attach(&self, id: ModelId, model: RandomForestModel) -> Result<FittedModel> {
        let (pool, _) = self.training_set(id.balancing)?;
        if model.n_features() != pool.n_features() {
            return Err(Error::DimensionMismatch {
                expected: pool.n_features(),
                got: model.n_features(),
            });
        }
        Ok(FittedModel {
            id,
            model,
            pool,
            tune_scores: None,
        })
    }

    pub fn evaluate(&self, model: &RandomForestModel) -> Result<EvalMetrics> {
        evaluate(model, &self.split.test)
    }

    /// Request for test row `row`; all features mutable within the
    /// original training ranges.
    pub fn request(&self, model: &RandomForestModel, row: usize) -> Result<CfRequest> {
        if row >= self.split.test.n_rows() {
            return Err(Error::InvalidArgument(format!(
                "test row {row} out of range (test set has {} rows)",
                self.split.test.n_rows()
            )));
        }
        let bounds = self.split.train.specs().iter().map(|s| (s.min, s.max)).collect();
        CfRequest::with_mask(
            row,
            self.split.test.row(row).to_vec(),
            vec![true; self.data.n_features()],
            bounds,
            model,
        )
    }

    /// Test rows the model predicts fail, in row order.
    pub fn predicted_fail_rows(&self, model: &RandomForestModel) -> Vec<usize> {
        let test = &self.split.test;
        (0..test.n_rows())
            .filter(|&i| model.predict(test.row(i)) == Label::Fail)
            .collect()
    }

    /// One request per predicted-fail test row, in row order, capped.
    pub fn requests(&self, model: &RandomForestModel) -> Result<Vec<CfRequest>> {
        let rows = self.predicted_fail_rows(model);
        let keep = self.cfg.run.max_explained_instances.apply(rows.len());
        rows[..keep].iter().map(|&i| self.request(model, i)).collect()
    }

    pub fn generate(&self, cell: CellId, fitted: &FittedModel, req: &CfRequest) -> Result<Vec<Counterfactual>> {
        let (model, pool, ranges) = (&fitted.model, &fitted.pool, &self.ranges);
        match cell.method {
            Method::WhatIf => whatif(req, model, pool, self.cfg.whatif.k, ranges),
            Method::Moc => {
                let seed = seed_for(self.cfg.run.master_seed, &cell, &format!("moc/{}", req.id));
                moc(req, model, pool, &self.cfg.moc.with_seed(seed), ranges)
            }
            Method::NiceSp => nice(req, model, pool, NiceReward::Sparsity, ranges).map(|c| vec![c]),
            Method::NicePr => nice(req, model, pool, NiceReward::Proximity, ranges).map(|c| vec![c]),
        }
    }

    /// Generates and scores counterfactuals for every request. Per-request
    /// errors are collected, not propagated.
    pub fn run_cell(&self, cell: CellId, fitted: &FittedModel, requests: &[CfRequest]) -> CellOutcome {
        let results: Vec<Result<(Vec<Counterfactual>, Vec<QualityRecord>)>> = requests
            .par_iter()
            .map(|req| {
                let cfs = self.generate(cell, fitted, req)?;
                let records = cfs
                    .iter()
                    .map(|cf| score(&req.x, cf, &fitted.model, &fitted.pool, &self.ranges, cell))
                    .collect::<Result<Vec<_>>>()?;
                Ok((cfs, records))
            })
            .collect();
        let mut out = CellOutcome::default();
        for (req, r) in requests.iter().zip(results) {
            match r {
                Ok((cfs, records)) => {
                    out.counterfactuals.extend(cfs);
                    out.records.extend(records);
                }
                Err(e) => out.failures.push(RequestFailure {
                    request_id: req.id,
                    message: e.to_string(),
                }),
            }
        }
        out
    }
}

fn load_data(cfg: &ExperimentConfig) -> Result<LabeledDataset> {
    if let Some(frame) = &cfg.data.frame {
        return load_frame_csv(frame);
    }
    let dir = cfg.data.oulad_dir.as_ref().expect("validated data source");
    let presentations: Vec<&str> = cfg.data.presentations.iter().map(String::as_str).collect();
    let frame = ingest_oulad(dir, &cfg.data.course, &presentations)?;
    info!("ingested {:?}", frame.report);
    Ok(frame.data)
}
