//! Single CART tree grown on a bootstrap sample.

use rand::Rng;

use super::{Hyperparams, SplitRule};
use crate::balance::ClassWeights;
use crate::dataset::{Label, LabeledDataset};
use crate::rng::Rng as ChaRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        p_fail: f64,
    },
}

/// Flat node array; node 0 is the root. `x[feature] <= threshold` goes left.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub(crate) nodes: Vec<Node>,
}

impl Tree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn from_nodes(nodes: Vec<Node>) -> Self {
        Tree { nodes }
    }

    #[inline]
    pub fn proba_fail(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { p_fail } => return p_fail,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }
}

/// How a candidate split is scored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Impurity {
    /// Plain Gini on integer class counts.
    Unweighted,
    /// Gini on class-weighted counts.
    Weighted(ClassWeights),
}

impl Impurity {
    pub(crate) fn for_weights(w: ClassWeights) -> Self {
        if w.is_unit() {
            Impurity::Unweighted
        } else {
            Impurity::Weighted(w)
        }
    }
}

/// Class tallies on one side of a split.
#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    fail: usize,
    pass: usize,
}

impl Tally {
    fn add(&mut self, fail: bool) {
        if fail {
            self.fail += 1;
        } else {
            self.pass += 1;
        }
    }

    fn minus(self, other: Tally) -> Tally {
        Tally {
            fail: self.fail - other.fail,
            pass: self.pass - other.pass,
        }
    }

    fn n(self) -> usize {
        self.fail + self.pass
    }
}

impl Impurity {
    /// `sum_c n_c^2 / n` for one child; maximising the sum over both
    /// children is equivalent to minimising weighted child Gini.
    #[inline]
    fn purity(self, t: Tally) -> f64 {
        match self {
            Impurity::Unweighted => {
                let n = t.n();
                if n == 0 {
                    return 0.0;
                }
                (t.fail * t.fail + t.pass * t.pass) as f64 / n as f64
            }
            Impurity::Weighted(w) => {
                let f = w.fail * t.fail as f64;
                let p = w.pass * t.pass as f64;
                let n = f + p;
                if n == 0.0 {
                    return 0.0;
                }
                (f * f + p * p) / n
            }
        }
    }

    fn split_score(self, left: Tally, total: Tally) -> f64 {
        self.purity(left) + self.purity(total.minus(left))
    }
}

struct Candidate {
    feature: usize,
    threshold: f64,
    score: f64,
}

pub(crate) struct Grower<'a> {
    data: &'a LabeledDataset,
    is_fail: Vec<bool>,
    hp: &'a Hyperparams,
    impurity: Impurity,
    features: Vec<usize>,
    // scratch buffer of (value, is_fail) pairs
    scratch: Vec<(f64, bool)>,
}

impl<'a> Grower<'a> {
    pub(crate) fn new(data: &'a LabeledDataset, hp: &'a Hyperparams, impurity: Impurity) -> Self {
        Grower {
            data,
            is_fail: data.labels().iter().map(|&l| l == Label::Fail).collect(),
            hp,
            impurity,
            features: (0..data.n_features()).collect(),
            scratch: Vec::new(),
        }
    }

    /// Grows a tree on `sample` (row indices with multiplicity).
    pub(crate) fn grow(&mut self, mut sample: Vec<usize>, rng: &mut ChaRng) -> Tree {
        let mut nodes = Vec::new();
        // (node slot, start, end)
        let mut stack = vec![(0usize, 0usize, sample.len())];
        nodes.push(Node::Leaf { p_fail: 0.0 });
        while let Some((slot, start, end)) = stack.pop() {
            let rows = &mut sample[start..end];
            let mut tally = Tally::default();
            for &r in rows.iter() {
                tally.add(self.is_fail[r]);
            }
            let p_fail = tally.fail as f64 / tally.n() as f64;
            let leaf = Node::Leaf { p_fail };
            if tally.n() < self.hp.min_node_size || tally.fail == 0 || tally.pass == 0 {
                nodes[slot] = leaf;
                continue;
            }
            let Some(best) = self.best_split(rows, tally, rng) else {
                nodes[slot] = leaf;
                continue;
            };
            let mid = partition(rows, |r| self.data.value(r, best.feature) <= best.threshold);
            debug_assert!(mid > 0 && mid < rows.len());
            let left = nodes.len();
            nodes.push(Node::Leaf { p_fail: 0.0 });
            nodes.push(Node::Leaf { p_fail: 0.0 });
            nodes[slot] = Node::Split {
                feature: best.feature,
                threshold: best.threshold,
                left,
                right: left + 1,
            };
            // Right pushed first so the left subtree is grown first.
            stack.push((left + 1, start + mid, end));
            stack.push((left, start, start + mid));
        }
        Tree { nodes }
    }

    fn best_split(&mut self, rows: &[usize], total: Tally, rng: &mut ChaRng) -> Option<Candidate> {
        let p = self.features.len();
        let mtry = self.hp.mtry.min(p);
        // Partial Fisher-Yates draws mtry distinct features.
        for i in 0..mtry {
            let j = rng.random_range(i..p);
            self.features.swap(i, j);
        }
        let mut best: Option<Candidate> = None;
        for k in 0..mtry {
            let feature = self.features[k];
            let cand = match self.hp.splitrule {
                SplitRule::Gini => self.best_gini(feature, rows, total),
                SplitRule::ExtraTrees => self.random_threshold(feature, rows, total, rng),
            };
            if let Some(c) = cand {
                if best.as_ref().is_none_or(|b| c.score > b.score) {
                    best = Some(c);
                }
            }
        }
        best
    }

    fn best_gini(&mut self, feature: usize, rows: &[usize], total: Tally) -> Option<Candidate> {
        self.scratch.clear();
        self.scratch
            .extend(rows.iter().map(|&r| (self.data.value(r, feature), self.is_fail[r])));
        self.scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let mut left = Tally::default();
        let mut best: Option<Candidate> = None;
        for i in 0..self.scratch.len() - 1 {
            left.add(self.scratch[i].1);
            let (a, b) = (self.scratch[i].0, self.scratch[i + 1].0);
            if a == b {
                continue;
            }
            let score = self.impurity.split_score(left, total);
            if best.as_ref().is_none_or(|c| score > c.score) {
                let mut threshold = a + (b - a) / 2.0;
                if threshold >= b {
                    threshold = a;
                }
                best = Some(Candidate {
                    feature,
                    threshold,
                    score,
                });
            }
        }
        best
    }

    fn random_threshold(
        &self,
        feature: usize,
        rows: &[usize],
        total: Tally,
        rng: &mut ChaRng,
    ) -> Option<Candidate> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &r in rows {
            let v = self.data.value(r, feature);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if lo >= hi {
            return None;
        }
        let threshold = loop {
            let t = rng.random_range(lo..hi);
            if t > lo {
                break t;
            }
        };
        let mut left = Tally::default();
        for &r in rows {
            if self.data.value(r, feature) <= threshold {
                left.add(self.is_fail[r]);
            }
        }
        Some(Candidate {
            feature,
            threshold,
            score: self.impurity.split_score(left, total),
        })
    }
}

/// Moves rows satisfying `pred` to the front; returns their count.
fn partition(rows: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let mut mid = 0;
    for i in 0..rows.len() {
        if pred(rows[i]) {
            rows.swap(i, mid);
            mid += 1;
        }
    }
    mid
}

/// Bootstrap of `n` draws with replacement. With non-unit weights each
/// row is drawn with probability proportional to its class weight.
pub(crate) fn bootstrap(data: &LabeledDataset, weights: ClassWeights, rng: &mut ChaRng) -> Vec<usize> {
    let n = data.n_rows();
    if weights.is_unit() {
        return (0..n).map(|_| rng.random_range(0..n)).collect();
    }
    let mut cumulative = Vec::with_capacity(n);
    let mut acc = 0.0;
    for &l in data.labels() {
        acc += weights.of(l);
        cumulative.push(acc);
    }
    (0..n)
        .map(|_| {
            let u = rng.random::<f64>() * acc;
            cumulative.partition_point(|&c| c <= u).min(n - 1)
        })
        .collect()
}
