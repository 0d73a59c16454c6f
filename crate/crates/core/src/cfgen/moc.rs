//! Multi-objective counterfactual search (NSGA-II over validity,
//! proximity, sparsity and plausibility).

use std::collections::HashSet;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::nsga::{best_by_crowding, constrained_rank_and_crowding, crowded_cmp, rank_and_crowding};
use super::{objectives_unchecked, CfRequest, Counterfactual, GenerationMeta, Method, MocObjectives};
use crate::dataset::LabeledDataset;
use crate::distance::RangeTable;
use crate::error::{Error, Result};
use crate::forest::Classifier;
use crate::rng;

/// Gaussian mutation scale as a fraction of the feature's range width.
const MUTATION_SCALE: f64 = 0.1;
/// Chance that a mutated feature is reset to the explained value.
const RESET_SHARE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MocConfig {
    pub population: usize,
    pub generations: usize,
    /// Per-feature mutation probability.
    pub mutation_rate: f64,
    /// Probability that a parent pair is recombined.
    pub crossover_rate: f64,
    /// Rank every valid candidate ahead of every invalid one during
    /// selection; otherwise plain non-dominated sorting on all four
    /// objectives.
    pub penalize_invalid: bool,
    pub seed: u64,
}

impl Default for MocConfig {
    fn default() -> Self {
        MocConfig {
            population: 100,
            generations: 50,
            mutation_rate: 0.3,
            crossover_rate: 0.7,
            penalize_invalid: true,
            seed: 0,
        }
    }
}

impl MocConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 || !self.population.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "MOC population must be even and at least 2, got {}",
                self.population
            )));
        }
        if self.generations == 0 {
            return Err(Error::InvalidArgument("MOC needs at least one generation".into()));
        }
        for (name, rate) in [("mutation", self.mutation_rate), ("crossover", self.crossover_rate)] {
            if !(rate > 0.0 && rate < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "MOC {name} rate must lie in (0, 1), got {rate}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone)]
struct Member {
    values: Vec<f64>,
    objectives: MocObjectives,
    born: usize,
}

struct Search<'a, M: ?Sized> {
    req: &'a CfRequest,
    model: &'a M,
    train: &'a LabeledDataset,
    ranges: &'a RangeTable,
    mutable: Vec<usize>,
    sigma: Vec<f64>,
}

impl<M: Classifier + ?Sized> Search<'_, M> {
    fn member(&self, values: Vec<f64>, born: usize) -> Member {
        let objectives = objectives_unchecked(&self.req.x, &values, self.model, self.train, self.ranges);
        Member {
            values,
            objectives,
            born,
        }
    }

    fn clamp(&self, j: usize, v: f64) -> f64 {
        let (lo, hi) = self.req.bounds[j];
        v.clamp(lo, hi)
    }

    /// Changes a random subset of mutable features to values drawn from
    /// the training marginals.
    fn initial(&self, rng: &mut rng::Rng) -> Vec<f64> {
        let mut v = self.req.x.clone();
        let share: f64 = rng.random();
        let mut changed = false;
        for &j in &self.mutable {
            if rng.random::<f64>() < share {
                v[j] = self.clamp(j, self.train.value(rng.random_range(0..self.train.n_rows()), j));
                changed = true;
            }
        }
        if !changed {
            let j = self.mutable[rng.random_range(0..self.mutable.len())];
            v[j] = self.clamp(j, self.train.value(rng.random_range(0..self.train.n_rows()), j));
        }
        v
    }

    fn mutate(&self, v: &mut [f64], rate: f64, rng: &mut rng::Rng) {
        for &j in &self.mutable {
            if rng.random::<f64>() >= rate {
                continue;
            }
            if v[j] != self.req.x[j] && rng.random::<f64>() < RESET_SHARE {
                v[j] = self.req.x[j];
            } else if self.sigma[j] > 0.0 {
                let step = Normal::new(0.0, self.sigma[j]).expect("positive sigma").sample(rng);
                v[j] = self.clamp(j, v[j] + step);
            }
        }
    }
}

fn tournament(rank: &[usize], crowd: &[f64], rng: &mut rng::Rng) -> usize {
    let a = rng.random_range(0..rank.len());
    let b = rng.random_range(0..rank.len());
    if crowded_cmp(rank, crowd, a, b).is_le() {
        a
    } else {
        b
    }
}

fn ranking(members: &[Member], penalize_invalid: bool) -> (Vec<usize>, Vec<f64>) {
    let points: Vec<Vec<f64>> = members.iter().map(|m| m.objectives.as_array().to_vec()).collect();
    if penalize_invalid {
        let valid: Vec<bool> = members.iter().map(|m| m.objectives.o_v == 0.0).collect();
        constrained_rank_and_crowding(&points, &valid)
    } else {
        rank_and_crowding(&points)
    }
}

fn key(values: &[f64]) -> Vec<u64> {
    values.iter().map(|v| v.to_bits()).collect()
}

/// NSGA-II survivor selection over distinct candidates. Clones only fill
/// the remaining slots when there are fewer than `n` distinct members.
fn survive(population: Vec<Member>, n: usize, penalize_invalid: bool) -> Vec<Member> {
    let mut seen = HashSet::new();
    let (unique, clones): (Vec<Member>, Vec<Member>) =
        population.into_iter().partition(|m| seen.insert(key(&m.values)));
    if unique.len() <= n {
        let missing = n - unique.len();
        return unique.into_iter().chain(clones.into_iter().take(missing)).collect();
    }
    let (rank, crowd) = ranking(&unique, penalize_invalid);
    let keep = best_by_crowding(&rank, &crowd, n);
    let mut slots: Vec<Option<Member>> = unique.into_iter().map(Some).collect();
    keep.into_iter().map(|i| slots[i].take().expect("survivor picked once")).collect()
}

/// Evolves a population around the request and returns the valid members
/// of the final non-dominated front, duplicates removed. An empty result
/// means the search found no valid candidate.
pub fn moc<M: Classifier + ?Sized>(
    req: &CfRequest,
    model: &M,
    train: &LabeledDataset,
    cfg: &MocConfig,
    ranges: &RangeTable,
) -> Result<Vec<Counterfactual>> {
    cfg.validate()?;
    let p = req.x.len();
    if train.n_features() != p || ranges.dim() != p || model.n_features() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: train.n_features(),
        });
    }
    if ranges.active_features() == 0 {
        return Err(Error::AllWidthsZero);
    }
    let search = Search {
        req,
        model,
        train,
        ranges,
        mutable: req.mutable_indices(),
        sigma: req
            .bounds
            .iter()
            .map(|(lo, hi)| MUTATION_SCALE * (hi - lo))
            .collect(),
    };
    let mut rng = rng::seeded(cfg.seed);
    let n = cfg.population;

    let mut population: Vec<Member> = (0..n)
        .map(|_| {
            let v = search.initial(&mut rng);
            search.member(v, 0)
        })
        .collect();

    for generation in 1..=cfg.generations {
        let (rank, crowd) = ranking(&population, cfg.penalize_invalid);
        let mut offspring = Vec::with_capacity(n);
        while offspring.len() < n {
            let mut a = population[tournament(&rank, &crowd, &mut rng)].values.clone();
            let mut b = population[tournament(&rank, &crowd, &mut rng)].values.clone();
            if rng.random::<f64>() < cfg.crossover_rate {
                for &j in &search.mutable {
                    if rng.random::<f64>() < 0.5 {
                        std::mem::swap(&mut a[j], &mut b[j]);
                    }
                }
            }
            search.mutate(&mut a, cfg.mutation_rate, &mut rng);
            search.mutate(&mut b, cfg.mutation_rate, &mut rng);
            offspring.push(search.member(a, generation));
            offspring.push(search.member(b, generation));
        }
        population.extend(offspring);
        population = survive(population, n, cfg.penalize_invalid);
    }

    // Valid members are never dominated by invalid ones, so the valid part
    // of the first front is the same under either ranking.
    let points: Vec<Vec<f64>> = population.iter().map(|m| m.objectives.as_array().to_vec()).collect();
    let (rank, _) = rank_and_crowding(&points);
    let mut seen = HashSet::new();
    let mut front = Vec::new();
    for (i, m) in population.into_iter().enumerate() {
        if rank[i] != 0 || m.objectives.o_v != 0.0 {
            continue;
        }
        if !seen.insert(key(&m.values)) {
            continue;
        }
        front.push(m);
    }
    // Stable output order: ascending proximity, then sparsity, then plausibility.
    front.sort_by(|a, b| {
        a.objectives
            .o_p
            .total_cmp(&b.objectives.o_p)
            .then(a.objectives.o_s.cmp(&b.objectives.o_s))
            .then(a.objectives.o_pl.total_cmp(&b.objectives.o_pl))
    });
    Ok(front
        .into_iter()
        .map(|m| Counterfactual {
            request_id: req.id,
            method: Method::Moc,
            values: m.values,
            meta: GenerationMeta::Moc {
                generation: m.born,
                objectives: m.objectives,
            },
        })
        .collect())
}
