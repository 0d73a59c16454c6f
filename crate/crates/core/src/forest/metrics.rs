use serde::{Deserialize, Serialize};

use super::Classifier;
use crate::dataset::{Label, LabeledDataset};
use crate::error::{Error, Result};

/// Test-set performance. F1 treats fail as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub accuracy: f64,
    pub auc: f64,
    pub f1: f64,
}

/// Rank-sum (Mann-Whitney) AUC of fail scores, ties counted half.
pub fn auc(fail_scores: &[f64], labels: &[Label]) -> Result<f64> {
    if fail_scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: fail_scores.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&l| l == Label::Fail).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 {
        return Err(Error::ClassAbsent(Label::Fail));
    }
    if n_neg == 0 {
        return Err(Error::ClassAbsent(Label::Pass));
    }
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| fail_scores[a].total_cmp(&fail_scores[b]));

    // Average 1-based ranks over tie groups.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && fail_scores[order[j]] == fail_scores[order[i]] {
            j += 1;
        }
        let avg = (i + 1 + j) as f64 / 2.0;
        let positives = order[i..j].iter().filter(|&&k| labels[k] == Label::Fail).count();
        rank_sum += avg * positives as f64;
        i = j;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

pub fn accuracy(predicted: &[Label], truth: &[Label]) -> f64 {
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len() as f64
}

/// F1 for the fail class; 0 when there are no true positives.
pub fn f1_fail(predicted: &[Label], truth: &[Label]) -> f64 {
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (&p, &t) in predicted.iter().zip(truth) {
        match (p, t) {
            (Label::Fail, Label::Fail) => tp += 1,
            (Label::Fail, Label::Pass) => fp += 1,
            (Label::Pass, Label::Fail) => fneg += 1,
            _ => {}
        }
    }
    if tp == 0 {
        return 0.0;
    }
    2.0 * tp as f64 / (2 * tp + fp + fneg) as f64
}

pub fn evaluate<C: Classifier + ?Sized>(model: &C, test: &LabeledDataset) -> Result<EvalMetrics> {
    if test.n_features() != model.n_features() {
        return Err(Error::DimensionMismatch {
            expected: model.n_features(),
            got: test.n_features(),
        });
    }
    let scores: Vec<f64> = test.rows().map(|r| model.proba_fail(r)).collect();
    let predicted: Vec<Label> = scores
        .iter()
        .map(|&s| if s >= super::THRESHOLD { Label::Fail } else { Label::Pass })
        .collect();
    Ok(EvalMetrics {
        accuracy: accuracy(&predicted, test.labels()),
        auc: auc(&scores, test.labels())?,
        f1: f1_fail(&predicted, test.labels()),
    })
}
