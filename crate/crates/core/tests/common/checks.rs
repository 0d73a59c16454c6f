//! Criterion checks shared by the acceptance runner and the oracle tests.
//! Every check compares the library against a brute-force or hand-derived
//! answer computed here.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cfbench::balance::{
    cost_weights, random_oversample, random_undersample, smote_with_origins, ClassWeights,
};
use cfbench::bench::{CellStatus, RunManifest};
use cfbench::cell::{Balancing, CellId, Tuning};
use cfbench::cfeval::{aggregate, QualityMetric, QualityRecord};
use cfbench::cfgen::{moc, nice, whatif, CfRequest, GenerationMeta, Method, MocConfig, NiceReward};
use cfbench::dataset::{Label, LabeledDataset};
use cfbench::distance::{distance, gower, k_nearest, Metric, RangeTable};
use cfbench::forest::{
    auc, fit_forest, fit_forest_weighted_path, Classifier, Hyperparams, SplitRule,
};

#[derive(Debug)]
pub struct Check {
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn from(failures: Vec<String>, summary: String) -> Check {
        match failures.first() {
            None => Check {
                passed: true,
                detail: summary,
            },
            Some(first) => Check {
                passed: false,
                detail: format!("{summary}; {} failure(s), first: {first}", failures.len()),
            },
        }
    }

    pub fn and(self, other: Check) -> Check {
        Check {
            passed: self.passed && other.passed,
            detail: format!("{}; {}", self.detail, other.detail),
        }
    }
}

/// Integer-valued features in `0..=50` with labels drawn at `fail_share`;
/// each class gets at least `min_each` rows.
pub fn random_labeled(rng: &mut ChaCha8Rng, n: usize, p: usize, fail_share: f64, min_each: usize) -> LabeledDataset {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..p).map(|_| rng.random_range(0..=50) as f64).collect())
        .collect();
    let mut labels: Vec<Label> = (0..n)
        .map(|_| if rng.random::<f64>() < fail_share { Label::Fail } else { Label::Pass })
        .collect();
    for i in 0..min_each {
        labels[i] = Label::Fail;
        labels[n - 1 - i] = Label::Pass;
    }
    let names = (0..p).map(|j| format!("f{j}")).collect();
    LabeledDataset::from_rows(&rows, labels, names).unwrap()
}

fn gower_oracle(a: &[f64], b: &[f64], widths: &[f64]) -> f64 {
    let active: Vec<usize> = (0..a.len()).filter(|&j| widths[j] > 0.0).collect();
    let total: f64 = active
        .iter()
        .map(|&j| ((a[j] - b[j]).abs() / widths[j]).min(1.0))
        .sum();
    total / active.len() as f64
}

/// Gower symmetry, identity, bounds and value on random pairs; k-NN
/// against a full sort.
pub fn distances(pairs: usize, queries: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut failures = Vec::new();
    for t in 0..pairs {
        let p = rng.random_range(1..=12);
        let widths: Vec<f64> = (0..p)
            .map(|j| {
                if j > 0 && rng.random::<f64>() < 0.2 {
                    0.0
                } else {
                    rng.random_range(0.5..100.0)
                }
            })
            .collect();
        let ranges = RangeTable::new(widths.clone()).unwrap();
        // Values may leave the table's range, as counterfactuals can.
        let mut draw = || -> Vec<f64> {
            widths
                .iter()
                .map(|w| rng.random_range(-0.3..1.3) * w.max(1.0))
                .collect()
        };
        let a = draw();
        let b = draw();
        let ab = gower(&a, &b, &ranges).unwrap();
        let ba = gower(&b, &a, &ranges).unwrap();
        let aa = gower(&a, &a, &ranges).unwrap();
        if ab != ba {
            failures.push(format!("pair {t}: asymmetric {ab} vs {ba}"));
        }
        if aa != 0.0 {
            failures.push(format!("pair {t}: gower(a, a) = {aa}"));
        }
        if !(0.0..=1.0).contains(&ab) {
            failures.push(format!("pair {t}: {ab} outside [0, 1]"));
        }
        let expected = gower_oracle(&a, &b, &widths);
        if (ab - expected).abs() > 1e-12 {
            failures.push(format!("pair {t}: {ab} vs oracle {expected}"));
        }
    }

    for q in 0..queries {
        let p = rng.random_range(1..=6);
        let n = rng.random_range(1..=80);
        // Small integer grid, so distance ties are common.
        let pool: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| rng.random_range(0..=5) as f64).collect())
            .collect();
        let mut widths = vec![5.0; p];
        for (j, w) in widths.iter_mut().enumerate().skip(1) {
            let lo = pool.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min);
            let hi = pool.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max);
            *w = hi - lo;
        }
        let ranges = RangeTable::new(widths).unwrap();
        let query: Vec<f64> = (0..p).map(|_| rng.random_range(0..=5) as f64).collect();
        let metric = if q % 2 == 0 { Metric::Gower } else { Metric::Heom };
        let k = rng.random_range(1..=n);
        let got = k_nearest(&query, &pool, metric, k, &ranges).unwrap();
        let mut all: Vec<(f64, usize)> = pool
            .iter()
            .enumerate()
            .map(|(i, r)| (distance(metric, &query, r, &ranges).unwrap(), i))
            .collect();
        all.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        let same = got.len() == k
            && got
                .iter()
                .zip(&all)
                .all(|(g, &(d, i))| g.index == i && g.distance == d);
        if !same {
            failures.push(format!("query {q} ({metric:?}, k = {k}): neighbour list differs from sort"));
        }
    }
    Check::from(failures, format!("{pairs} Gower pairs, {queries} k-NN queries"))
}

/// Whether `s` is `a + λ (b − a)` for some pair of rows, with every
/// per-feature λ in [0, 1] and agreeing within 1e-9.
fn convex_pair(s: &[f64], members: &[&[f64]]) -> bool {
    for (ia, a) in members.iter().enumerate() {
        'pairs: for (ib, b) in members.iter().enumerate() {
            if ia == ib {
                continue;
            }
            let mut lambda: Option<f64> = None;
            for j in 0..s.len() {
                if a[j] == b[j] {
                    if s[j] != a[j] {
                        continue 'pairs;
                    }
                    continue;
                }
                let l = (s[j] - a[j]) / (b[j] - a[j]);
                if !(-1e-9..=1.0 + 1e-9).contains(&l) {
                    continue 'pairs;
                }
                match lambda {
                    None => lambda = Some(l),
                    Some(l0) if (l - l0).abs() > 1e-9 => continue 'pairs,
                    Some(_) => {}
                }
            }
            return true;
        }
    }
    false
}

/// Class counts after each resampler, SMOTE convexity, cost weights.
pub fn balancing(datasets: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut failures = Vec::new();
    let mut synthetics = 0;
    for t in 0..datasets {
        let n = rng.random_range(30..=200);
        let p = rng.random_range(1..=6);
        let share = if t % 3 == 0 {
            rng.random_range(0.55..0.85)
        } else {
            rng.random_range(0.15..0.45)
        };
        let data = loop {
            let d = random_labeled(&mut rng, n, p, share, 7);
            if d.count(Label::Fail) != d.count(Label::Pass) {
                break d;
            }
        };
        let (fail, pass) = (data.count(Label::Fail), data.count(Label::Pass));
        let seed = t as u64;
        let balanced = |d: &LabeledDataset| d.count(Label::Fail) == d.count(Label::Pass);

        let under = random_undersample(&data, seed).unwrap();
        if !balanced(&under) || under.count(Label::Fail) != fail.min(pass) {
            failures.push(format!("dataset {t}: undersampling left {:?}", under.class_counts()));
        }
        let over = random_oversample(&data, seed).unwrap();
        if !balanced(&over) || over.count(Label::Fail) != fail.max(pass) {
            failures.push(format!("dataset {t}: oversampling left {:?}", over.class_counts()));
        }
        let (sm, _) = smote_with_origins(&data, 5, seed).unwrap();
        if !balanced(&sm) {
            failures.push(format!("dataset {t}: SMOTE left {:?}", sm.class_counts()));
        }
        let minority = if fail < pass { Label::Fail } else { Label::Pass };
        let members: Vec<&[f64]> = data.indices_of(minority).into_iter().map(|i| data.row(i)).collect();
        for i in data.n_rows()..sm.n_rows() {
            synthetics += 1;
            if sm.label(i) != minority {
                failures.push(format!("dataset {t}: synthetic row {i} has the majority label"));
            } else if !convex_pair(sm.row(i), &members) {
                failures.push(format!("dataset {t}: synthetic row {i} is no convex combination"));
            }
        }

        let w = cost_weights(&data).unwrap();
        let ratio = fail.max(pass) as f64 / fail.min(pass) as f64;
        let expected = if minority == Label::Fail {
            ClassWeights { fail: ratio, pass: 1.0 }
        } else {
            ClassWeights { fail: 1.0, pass: ratio }
        };
        if w != expected {
            failures.push(format!("dataset {t}: cost weights {w:?}, expected {expected:?}"));
        }
    }
    Check::from(
        failures,
        format!("{datasets} datasets, {synthetics} SMOTE rows traced to a minority pair"),
    )
}

fn brute_auc(scores: &[f64], labels: &[Label]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] == Label::Fail && labels[j] == Label::Pass {
                pairs += 1.0;
                wins += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    wins / pairs
}

/// AUC against all-pairs counting; weighted and unweighted Gini paths with
/// unit weights.
pub fn forest_metrics(vectors: usize, seeds: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for t in 0..vectors {
        let n = rng.random_range(2..=60);
        let coarse = t % 2 == 0;
        let scores: Vec<f64> = (0..n)
            .map(|_| {
                let s: f64 = rng.random();
                if coarse {
                    (s * 10.0).round() / 10.0
                } else {
                    s
                }
            })
            .collect();
        let mut labels: Vec<Label> = (0..n)
            .map(|_| if rng.random::<bool>() { Label::Fail } else { Label::Pass })
            .collect();
        labels[0] = Label::Fail;
        labels[n - 1] = Label::Pass;
        let got = auc(&scores, &labels).unwrap();
        let delta = (got - brute_auc(&scores, &labels)).abs();
        worst = worst.max(delta);
        if delta >= 1e-12 {
            failures.push(format!("vector {t}: |delta| = {delta:e}"));
        }
    }

    for seed in 0..seeds {
        let data = random_labeled(&mut rng, 120, 5, 0.35, 5);
        let hp = Hyperparams {
            mtry: 2,
            splitrule: if seed % 2 == 0 { SplitRule::Gini } else { SplitRule::ExtraTrees },
            min_node_size: 1 + 2 * (seed as usize % 3),
            n_trees: 25,
        };
        let plain = fit_forest(&data, &hp, ClassWeights::UNIT, seed).unwrap();
        let weighted = fit_forest_weighted_path(&data, &hp, ClassWeights::UNIT, seed).unwrap();
        if plain.trees() != weighted.trees() {
            failures.push(format!("seed {seed}: weighted path grew different trees"));
        }
    }
    Check::from(
        failures,
        format!("{vectors} AUC vectors (max |delta| {worst:e}), {seeds} seeds of unit-weight trees"),
    )
}

/// Width of every feature in the WhatIf fixture. A power of two keeps the
/// per-feature Gower terms exact, so ties can be predicted exactly.
const GRID: i64 = 16;

fn fixture_row(rng: &mut ChaCha8Rng, p: usize) -> Vec<f64> {
    (0..p).map(|_| rng.random_range(0..=GRID) as f64).collect()
}

fn fixture_label(row: &[f64], rng: &mut ChaCha8Rng) -> Label {
    let noise = rng.random_range(-6.0..=6.0);
    if row.iter().sum::<f64>() + noise > 48.0 {
        Label::Pass
    } else {
        Label::Fail
    }
}

/// WhatIf against filter-then-sort on `n_requests` requests, some with an
/// immutable feature.
pub fn whatif_oracle(n_requests: usize) -> Check {
    const P: usize = 6;
    const K: usize = 10;
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut rows: Vec<Vec<f64>> = (0..300).map(|_| fixture_row(&mut rng, P)).collect();
    rows[0] = vec![0.0; P];
    rows[1] = vec![GRID as f64; P];
    let labels: Vec<Label> = rows.iter().map(|r| fixture_label(r, &mut rng)).collect();
    let names = (0..P).map(|j| format!("f{j}")).collect();
    let train = LabeledDataset::from_rows(&rows, labels, names).unwrap();
    let ranges = RangeTable::from_dataset(&train);
    assert!(ranges.widths().iter().all(|&w| w == GRID as f64));
    let hp = Hyperparams {
        n_trees: 50,
        ..Hyperparams::defaults_for(P)
    };
    let model = fit_forest(&train, &hp, ClassWeights::UNIT, 5).unwrap();

    let mut failures = Vec::new();
    let mut done = 0;
    let mut shortfalls = 0;
    while done < n_requests {
        let x = fixture_row(&mut rng, P);
        if model.predict(&x) != Label::Fail {
            continue;
        }
        let mask: Vec<bool> = (0..P).map(|j| j != done % 7).collect();
        let req = CfRequest::with_mask(done, x.clone(), mask.clone(), vec![(0.0, GRID as f64); P], &model).unwrap();
        let got = whatif(&req, &model, &train, K, &ranges);

        let mut expected: Vec<(i64, usize)> = (0..train.n_rows())
            .filter(|&i| {
                let row = train.row(i);
                model.predict(row) == Label::Pass && (0..P).all(|j| mask[j] || row[j] == x[j])
            })
            .map(|i| {
                let l1: f64 = train.row(i).iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
                (l1 as i64, i)
            })
            .collect();
        expected.sort();
        match got {
            Err(_) if expected.len() < K => shortfalls += 1,
            Err(e) => failures.push(format!("request {done}: unexpected error {e}")),
            Ok(_) if expected.len() < K => {
                failures.push(format!("request {done}: only {} candidates, expected an error", expected.len()))
            }
            Ok(cfs) => {
                let ok = cfs.len() == K
                    && cfs.iter().zip(&expected).enumerate().all(|(r, (cf, &(l1, i)))| {
                        let d = l1 as f64 / (GRID as f64 * P as f64);
                        cf.values == train.row(i)
                            && matches!(cf.meta, GenerationMeta::WhatIf { rank, pool_index, distance }
                                if rank == r && pool_index == i && (distance - d).abs() < 1e-12)
                    });
                if !ok {
                    failures.push(format!("request {done}: output differs from the oracle"));
                }
            }
        }
        done += 1;
    }
    Check::from(
        failures,
        format!("WhatIf: {n_requests} requests ({shortfalls} correctly refused)"),
    )
}

/// `p(pass) = clamp(bias + w · x, 0, 1)`.
struct Linear {
    bias: f64,
    w: Vec<f64>,
}

impl Classifier for Linear {
    fn n_features(&self) -> usize {
        self.w.len()
    }

    fn proba_fail(&self, x: &[f64]) -> f64 {
        let mut p = self.bias;
        for (w, v) in self.w.iter().zip(x) {
            p += w * v;
        }
        1.0 - p.clamp(0.0, 1.0)
    }
}

/// Fails iff `x[feature] < cut`.
struct Step {
    p: usize,
    feature: usize,
    cut: f64,
}

impl Classifier for Step {
    fn n_features(&self) -> usize {
        self.p
    }

    fn proba_fail(&self, x: &[f64]) -> f64 {
        if x[self.feature] < self.cut {
            1.0
        } else {
            0.0
        }
    }
}

/// Fails iff the feature sum is below `cut`.
struct SumStep {
    p: usize,
    cut: f64,
}

impl Classifier for SumStep {
    fn n_features(&self) -> usize {
        self.p
    }

    fn proba_fail(&self, x: &[f64]) -> f64 {
        if x.iter().sum::<f64>() < self.cut {
            1.0
        } else {
            0.0
        }
    }
}

struct Trace {
    name: &'static str,
    model: Box<dyn Classifier>,
    rows: Vec<Vec<f64>>,
    labels: Vec<Label>,
    x: Vec<f64>,
    mutable: Vec<bool>,
    nun: usize,
    /// Expected copy order under the sparsity and proximity rewards.
    sparsity: Vec<usize>,
    proximity: Vec<usize>,
}

fn traces() -> Vec<Trace> {
    use Label::{Fail as F, Pass as P};
    vec![
        Trace {
            name: "single step",
            model: Box::new(Step { p: 2, feature: 0, cut: 1.0 }),
            rows: vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![5.0, 5.0]],
            labels: vec![F, P, P],
            x: vec![0.0, 0.0],
            mutable: vec![true; 2],
            nun: 1,
            sparsity: vec![0],
            proximity: vec![0],
        },
        Trace {
            name: "neighbour must be labelled pass",
            model: Box::new(Step { p: 2, feature: 0, cut: 1.0 }),
            rows: vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![5.0, 5.0]],
            labels: vec![F, F, P, P],
            x: vec![0.0, 0.0],
            mutable: vec![true; 2],
            nun: 2,
            sparsity: vec![0],
            proximity: vec![0],
        },
        Trace {
            name: "largest gain first",
            model: Box::new(Linear {
                bias: 0.0,
                w: vec![0.1, 0.3, 0.2, 0.4],
            }),
            rows: vec![vec![0.0; 4], vec![1.0; 4], vec![2.0; 4]],
            labels: vec![F, P, P],
            x: vec![0.0; 4],
            mutable: vec![true; 4],
            nun: 1,
            sparsity: vec![3, 1],
            proximity: vec![3, 1],
        },
        Trace {
            name: "proximity prefers the cheap copy",
            model: Box::new(Linear {
                bias: 0.1,
                w: vec![0.06, 0.3],
            }),
            rows: vec![vec![0.0, 0.0], vec![8.0, 1.0], vec![10.0, 10.0]],
            labels: vec![F, P, P],
            x: vec![0.0, 0.0],
            mutable: vec![true; 2],
            nun: 1,
            sparsity: vec![0],
            proximity: vec![1, 0],
        },
        Trace {
            name: "ties go to the lower index",
            model: Box::new(Linear {
                bias: 0.0,
                w: vec![0.3; 3],
            }),
            rows: vec![vec![0.0; 3], vec![1.0; 3]],
            labels: vec![F, P],
            x: vec![0.0; 3],
            mutable: vec![true; 3],
            nun: 1,
            sparsity: vec![0, 1],
            proximity: vec![0, 1],
        },
        Trace {
            name: "immutable feature",
            model: Box::new(Linear {
                bias: 0.2,
                w: vec![0.5, 0.2, 0.2],
            }),
            rows: vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 1.0]],
            labels: vec![F, P, P],
            x: vec![0.0; 3],
            mutable: vec![false, true, true],
            nun: 2,
            sparsity: vec![1, 2],
            proximity: vec![1, 2],
        },
        Trace {
            name: "neighbour by HEOM, not Gower",
            model: Box::new(SumStep { p: 2, cut: 6.0 }),
            rows: vec![vec![0.0, 0.0], vec![6.0, 0.0], vec![4.0, 4.0], vec![10.0, 10.0]],
            labels: vec![F, P, P, P],
            x: vec![0.0, 0.0],
            mutable: vec![true; 2],
            nun: 2,
            sparsity: vec![0, 1],
            proximity: vec![0, 1],
        },
    ]
}

/// NICE on hand-traced toy models.
pub fn nice_traces() -> Check {
    let mut failures = Vec::new();
    let all = traces();
    for t in &all {
        let p = t.x.len();
        let names = (0..p).map(|j| format!("f{j}")).collect();
        let train = LabeledDataset::from_rows(&t.rows, t.labels.clone(), names).unwrap();
        let ranges = RangeTable::from_dataset(&train);
        let bounds = train.specs().iter().map(|s| (s.min, s.max)).collect();
        let req = CfRequest::with_mask(0, t.x.clone(), t.mutable.clone(), bounds, &*t.model).unwrap();
        for (reward, order) in [(NiceReward::Sparsity, &t.sparsity), (NiceReward::Proximity, &t.proximity)] {
            let mut expected = t.x.clone();
            for &j in order.iter() {
                expected[j] = t.rows[t.nun][j];
            }
            match nice(&req, &*t.model, &train, reward, &ranges) {
                Ok(cf) => {
                    let same = cf.values == expected
                        && matches!(&cf.meta, GenerationMeta::Nice { nun_index, copied }
                            if *nun_index == t.nun && copied == order);
                    if !same {
                        failures.push(format!("{} ({reward:?}): got {:?}", t.name, cf.meta));
                    }
                }
                Err(e) => failures.push(format!("{} ({reward:?}): {e}", t.name)),
            }
        }
    }
    Check::from(failures, format!("NICE: {} hand traces", all.len()))
}

/// MOC on a one-feature step at 10: the closest returned counterfactual
/// must sit just above the boundary.
pub fn moc_boundary(seeds: u64) -> Check {
    let model = Step { p: 1, feature: 0, cut: 10.0 };
    let mut rows: Vec<Vec<f64>> = (0..=28).map(|i| vec![i as f64 * 0.7]).collect();
    rows.push(vec![20.0]);
    let labels = rows.iter().map(|r| model.predict(r)).collect();
    let train = LabeledDataset::from_rows(&rows, labels, vec!["x".into()]).unwrap();
    let ranges = RangeTable::from_dataset(&train);
    let req = CfRequest::new(0, vec![0.0], &model, &train).unwrap();
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for seed in 0..seeds {
        let cfg = MocConfig {
            seed,
            ..MocConfig::default()
        };
        match moc(&req, &model, &train, &cfg, &ranges) {
            Ok(front) if !front.is_empty() => {
                let v = front
                    .iter()
                    .map(|cf| cf.values[0])
                    .min_by(|a, b| a.total_cmp(b))
                    .unwrap();
                let rel = (v - 10.0).abs() / 10.0;
                worst = worst.max(rel);
                if rel > 0.02 {
                    failures.push(format!("seed {seed}: closest counterfactual at {v}"));
                }
            }
            Ok(_) => failures.push(format!("seed {seed}: empty front")),
            Err(e) => failures.push(format!("seed {seed}: {e}")),
        }
    }
    Check::from(
        failures,
        format!("MOC 1-D toy: {seeds} seeds, worst offset from 10 is {:.2}%", 100.0 * worst),
    )
}

fn dominates(a: &[f64; 4], b: &[f64; 4]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y)
}

fn cell_dir(out: &Path, cell: &CellId) -> PathBuf {
    out.join("cells").join(cell.slug())
}

/// Pairwise non-dominance of every returned MOC set, read back from the
/// per-cell metadata.
pub fn moc_fronts(out: &Path, manifest: &RunManifest) -> Check {
    let mut failures = Vec::new();
    let mut cells = 0;
    let mut sets = 0;
    for rec in manifest.cells.iter().filter(|r| r.cell.method == Method::Moc) {
        if rec.status != CellStatus::Completed {
            failures.push(format!("{}: not completed", rec.cell));
            continue;
        }
        cells += 1;
        let text = std::fs::read_to_string(cell_dir(out, &rec.cell).join("meta.jsonl")).unwrap();
        let mut by_request: BTreeMap<u64, Vec<[f64; 4]>> = BTreeMap::new();
        for line in text.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            let o = &v["meta"]["objectives"];
            let obj = ["o_v", "o_p", "o_s", "o_pl"].map(|k| o[k].as_f64().unwrap());
            by_request.entry(v["request_id"].as_u64().unwrap()).or_default().push(obj);
        }
        for (id, objs) in &by_request {
            sets += 1;
            for (i, a) in objs.iter().enumerate() {
                for (j, b) in objs.iter().enumerate() {
                    if i != j && dominates(a, b) {
                        failures.push(format!("{} request {id}: member {i} dominates member {j}", rec.cell));
                    }
                }
            }
        }
    }
    if cells == 0 {
        failures.push("no MOC cell in the run".into());
    }
    Check::from(failures, format!("MOC fronts: {sets} sets over {cells} cells"))
}

/// Every scored counterfactual is valid.
pub fn validity(records: &[QualityRecord]) -> Check {
    let mut per_method: BTreeMap<Method, (usize, usize)> = BTreeMap::new();
    for r in records {
        let e = per_method.entry(r.cell.method).or_default();
        e.0 += 1;
        e.1 += (r.validity == 1) as usize;
    }
    let failures: Vec<String> = per_method
        .iter()
        .filter(|(_, (n, ok))| n != ok)
        .map(|(m, (n, ok))| format!("{m}: {ok} of {n} valid"))
        .collect();
    let mut failures = failures;
    for m in Method::ALL {
        if !per_method.contains_key(&m) {
            failures.push(format!("{m}: no counterfactuals"));
        }
    }
    let summary = per_method
        .iter()
        .map(|(m, (n, ok))| format!("{m} {ok}/{n}"))
        .collect::<Vec<_>>()
        .join(", ");
    Check::from(failures, format!("valid: {summary}"))
}

/// Per tuning block, the number of balancing strategies in which both NICE
/// variants have median proximity and sparsity no worse than MOC and WhatIf.
pub fn nice_ordering(records: &[QualityRecord], balancing: &[Balancing], tuning: &[Tuning]) -> Check {
    let summaries = aggregate(records).unwrap();
    let median = |cell: CellId, metric: QualityMetric| {
        summaries
            .iter()
            .find(|s| s.cell == cell)
            .map(|s| s.get(metric).median)
    };
    let mut failures = Vec::new();
    let mut parts = Vec::new();
    let mut behind = Vec::new();
    for &t in tuning {
        let mut wins = 0;
        for &b in balancing {
            let lost: Vec<&str> = [QualityMetric::Proximity, QualityMetric::Sparsity]
                .into_iter()
                .filter(|&metric| {
                    ![Method::NiceSp, Method::NicePr].iter().all(|&n| {
                        [Method::Moc, Method::WhatIf].iter().all(|&o| {
                            match (median(CellId::new(b, t, n), metric), median(CellId::new(b, t, o), metric)) {
                                (Some(x), Some(y)) => x <= y,
                                _ => false,
                            }
                        })
                    })
                })
                .map(QualityMetric::as_str)
                .collect();
            if lost.is_empty() {
                wins += 1;
            } else {
                behind.push(format!("{b}:{t} on {}", lost.join("+")));
            }
        }
        parts.push(format!("{t} {wins}/{}", balancing.len()));
        if wins < 4.min(balancing.len()) {
            failures.push(format!("{t}: NICE ahead in only {wins} strategies"));
        }
    }
    if !behind.is_empty() {
        parts.push(format!("behind in {}", behind.join(", ")));
    }
    Check::from(failures, format!("NICE medians ahead: {}", parts.join(", ")))
}

/// MOC strictly largest and both NICE variants strictly below MOC and
/// WhatIf in every balancing × tuning block.
pub fn count_shape(counts: &BTreeMap<CellId, usize>, balancing: &[Balancing], tuning: &[Tuning]) -> Check {
    let mut failures = Vec::new();
    let mut blocks = 0;
    let mut lines = Vec::new();
    for &t in tuning {
        for &b in balancing {
            blocks += 1;
            let n = |m| counts.get(&CellId::new(b, t, m)).copied().unwrap_or(0);
            let (mo, wi, sp, pr) = (n(Method::Moc), n(Method::WhatIf), n(Method::NiceSp), n(Method::NicePr));
            lines.push(format!("{b}:{t} {mo}/{wi}/{sp}/{pr}"));
            if !(mo > wi && mo > sp && mo > pr && sp.max(pr) < wi) {
                failures.push(format!("{b}:{t}: MOC {mo}, WhatIf {wi}, NICE_sp {sp}, NICE_pr {pr}"));
            }
        }
    }
    Check::from(
        failures,
        format!("{blocks} blocks, MOC/WhatIf/NICE_sp/NICE_pr: {}", lines.join(", ")),
    )
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

/// Byte equality of every output file except the manifest, which records
/// timings.
pub fn same_outputs(a: &Path, b: &Path) -> Check {
    let fa = files_under(a);
    let fb = files_under(b);
    let mut failures = Vec::new();
    if fa != fb {
        failures.push("the two runs wrote different file sets".into());
    }
    let mut compared = 0;
    for f in fa.iter().filter(|f| f.file_name().is_some_and(|n| n != "manifest.json")) {
        compared += 1;
        if std::fs::read(a.join(f)).ok() != std::fs::read(b.join(f)).ok() {
            failures.push(format!("{} differs", f.display()));
        }
    }
    Check::from(failures, format!("{compared} files byte-identical"))
}
