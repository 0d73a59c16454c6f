//! Counterfactual explanations for tabular student-success classifiers.
//!
//! The crate covers the whole pipeline: ingesting OULAD click-stream logs
//! into a weekly click-count frame, balancing the training data, fitting
//! and tuning random forests, generating counterfactuals with WhatIf, MOC
//! and NICE, scoring them and running the whole balancing × tuning × method
//! grid as a reproducible benchmark.

pub mod balance;
pub mod bench;
pub mod cell;
pub mod cfeval;
pub mod cfgen;
pub mod dataset;
pub mod distance;
pub mod error;
pub mod forest;
pub(crate) mod rng;

pub use error::{Error, Result};
