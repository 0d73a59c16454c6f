//! Non-dominated sorting and crowding distance for minimisation problems.

use std::cmp::Ordering;

/// `a` dominates `b`: no worse anywhere, strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut better = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            better = true;
        }
    }
    better
}

/// Fast non-dominated sort. Returns fronts of indices, best first; each
/// front keeps ascending index order.
pub fn non_dominated_fronts(points: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dominates(&points[i], &points[j]) {
                dominates_list[i].push(j);
                dominated_by[j] += 1;
            } else if dominates(&points[j], &points[i]) {
                dominates_list[j].push(i);
                dominated_by[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominates_list[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(std::mem::replace(&mut current, next));
    }
    fronts
}

/// Crowding distance of each member of one front (same order as `front`).
/// Boundary members get infinity.
#[allow(clippy::needless_range_loop)]
pub fn crowding_distance(points: &[Vec<f64>], front: &[usize]) -> Vec<f64> {
    let m = front.len();
    let mut dist = vec![0.0; m];
    if m <= 2 {
        return vec![f64::INFINITY; m];
    }
    let n_obj = points[front[0]].len();
    let mut order: Vec<usize> = (0..m).collect();
    for k in 0..n_obj {
        order.sort_by(|&a, &b| {
            points[front[a]][k]
                .total_cmp(&points[front[b]][k])
                .then(a.cmp(&b))
        });
        let lo = points[front[order[0]]][k];
        let hi = points[front[order[m - 1]]][k];
        dist[order[0]] = f64::INFINITY;
        dist[order[m - 1]] = f64::INFINITY;
        if hi > lo {
            for w in 1..m - 1 {
                let prev = points[front[order[w - 1]]][k];
                let next = points[front[order[w + 1]]][k];
                dist[order[w]] += (next - prev) / (hi - lo);
            }
        }
    }
    dist
}

/// Rank (front number) and crowding distance for every point.
pub fn rank_and_crowding(points: &[Vec<f64>]) -> (Vec<usize>, Vec<f64>) {
    let mut rank = vec![0; points.len()];
    let mut crowd = vec![0.0; points.len()];
    for (r, front) in non_dominated_fronts(points).iter().enumerate() {
        for (&i, d) in front.iter().zip(crowding_distance(points, front)) {
            rank[i] = r;
            crowd[i] = d;
        }
    }
    (rank, crowd)
}

/// Like [`rank_and_crowding`], but every feasible point ranks ahead of
/// every infeasible one: fronts are computed within each group and the
/// infeasible fronts are numbered after the feasible ones.
pub fn constrained_rank_and_crowding(points: &[Vec<f64>], feasible: &[bool]) -> (Vec<usize>, Vec<f64>) {
    let mut rank = vec![0; points.len()];
    let mut crowd = vec![0.0; points.len()];
    let mut offset = 0;
    for want in [true, false] {
        let members: Vec<usize> = (0..points.len()).filter(|&i| feasible[i] == want).collect();
        let sub: Vec<Vec<f64>> = members.iter().map(|&i| points[i].clone()).collect();
        let (r, c) = rank_and_crowding(&sub);
        for (k, &i) in members.iter().enumerate() {
            rank[i] = offset + r[k];
            crowd[i] = c[k];
        }
        offset += r.iter().max().map_or(0, |m| m + 1);
    }
    (rank, crowd)
}

/// Crowded-comparison order: lower rank first, then larger crowding.
pub fn crowded_cmp(rank: &[usize], crowd: &[f64], a: usize, b: usize) -> Ordering {
    rank[a]
        .cmp(&rank[b])
        .then(crowd[b].total_cmp(&crowd[a]))
        .then(a.cmp(&b))
}

/// Indices of the `n` survivors under crowded comparison.
pub fn select_survivors(points: &[Vec<f64>], n: usize) -> Vec<usize> {
    let (rank, crowd) = rank_and_crowding(points);
    best_by_crowding(&rank, &crowd, n)
}

/// The `n` best indices under crowded comparison of precomputed ranks.
pub fn best_by_crowding(rank: &[usize], crowd: &[f64], n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..rank.len()).collect();
    idx.sort_by(|&a, &b| crowded_cmp(rank, crowd, a, b));
    idx.truncate(n);
    idx
}
