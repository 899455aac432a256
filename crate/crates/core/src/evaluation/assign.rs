use serde::{Deserialize, Serialize};

use super::cost::{gain_ratio_db, geodesic, pairwise_cost, PairCost, Sigmas};
use crate::mpc::MpcParam;

/// Default cost charged per unmatched element.
pub const DEFAULT_C_UM: f64 = 3.0;

/// Minimum-cost perfect matching on a square matrix, returning the column
/// assigned to each row. Shortest augmenting paths with row/column potentials.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // 1-based with a virtual column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=n {
        out[owner[j] - 1] = j - 1;
    }
    out
}

/// Matching of rows to columns where any element may stay unmatched at
/// cost `c_um`; pairs costing more than `2·c_um` (or non-finite) never match.
/// Returns the pairs and the unmatched rows and columns.
pub fn match_pairs(cost: &[Vec<f64>], c_um: f64) -> (Vec<(usize, usize)>, Vec<usize>, Vec<usize>) {
    let n = cost.len();
    let m = cost.first().map_or(0, |r| r.len());
    let allowed = |c: f64| c.is_finite() && c <= 2.0 * c_um;
    let finite_sum: f64 = cost.iter().flatten().filter(|c| allowed(**c)).sum();
    let big = 1.0 + finite_sum + c_um * (n + m) as f64;
    let s = n + m;
    let mut full = vec![vec![big; s]; s];
    for i in 0..n {
        for j in 0..m {
            if allowed(cost[i][j]) {
                full[i][j] = cost[i][j];
            }
        }
        full[i][m + i] = c_um;
    }
    for j in 0..m {
        full[n + j][j] = c_um;
        for k in 0..n {
            full[n + j][m + k] = 0.0;
        }
    }
    let cols = hungarian(&full);
    let mut pairs = Vec::new();
    let mut unmatched_rows = Vec::new();
    let mut matched_cols = vec![false; m];
    for (i, &j) in cols.iter().enumerate().take(n) {
        if j < m && allowed(cost[i][j]) {
            pairs.push((i, j));
            matched_cols[j] = true;
        } else {
            unmatched_rows.push(i);
        }
    }
    let unmatched_cols = (0..m).filter(|&j| !matched_cols[j]).collect();
    (pairs, unmatched_rows, unmatched_cols)
}

/// Ungated matching of `min(rows, cols)` pairs; non-finite entries are
/// matched only when unavoidable and then dropped.
pub fn nearest_pairs(cost: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let n = cost.len();
    let m = cost.first().map_or(0, |r| r.len());
    let s = n.max(m);
    let big = 1.0 + cost.iter().flatten().filter(|c| c.is_finite()).map(|c| c.abs()).sum::<f64>();
    let mut full = vec![vec![0.0; s]; s];
    for i in 0..n {
        for j in 0..m {
            full[i][j] = if cost[i][j].is_finite() { cost[i][j] } else { big };
        }
    }
    hungarian(&full).into_iter().enumerate().filter(|&(i, j)| i < n && j < m && cost[i][j].is_finite()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub gt: usize,
    pub est: usize,
    pub cost: PairCost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationResult {
    pub pairs: Vec<Pair>,
    pub unmatched_gt: Vec<usize>,
    pub unmatched_est: Vec<usize>,
    pub sigmas: Sigmas,
    pub c_um: f64,
}

impl AssociationResult {
    pub fn total_cost(&self) -> f64 {
        self.pairs.iter().map(|p| p.cost.total).sum::<f64>() + self.c_um * (self.unmatched_gt.len() + self.unmatched_est.len()) as f64
    }
}

fn cost_matrix(gt: &[MpcParam], est: &[MpcParam], sigmas: &Sigmas) -> Vec<Vec<PairCost>> {
    gt.iter().map(|g| est.iter().map(|e| pairwise_cost(g, e, sigmas)).collect()).collect()
}

pub fn associate(gt: &[MpcParam], est: &[MpcParam], sigmas: &Sigmas, c_um: f64) -> AssociationResult {
    let costs = cost_matrix(gt, est, sigmas);
    let totals: Vec<Vec<f64>> = costs.iter().map(|r| r.iter().map(|c| c.total).collect()).collect();
    let (pairs, unmatched_gt, unmatched_est) = match_pairs(&totals, c_um);
    AssociationResult {
        pairs: pairs.into_iter().map(|(g, e)| Pair { gt: g, est: e, cost: costs[g][e] }).collect(),
        unmatched_gt,
        unmatched_est,
        sigmas: *sigmas,
        c_um,
    }
}

/// Spread about zero, matching how the costs normalise the raw numerators.
/// The geodesic numerator is a magnitude, so a spread about its mean would
/// badly understate it.
fn zero_mean_std(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// Spreads of the cost numerators over a provisional nearest-neighbour
/// association at unit sigmas (no gating). Components that come out zero
/// or non-finite, or fewer than two provisional pairs, fall back to `defaults`.
pub fn empirical_sigmas(gt: &[MpcParam], est: &[MpcParam], defaults: &Sigmas) -> Sigmas {
    let unit = Sigmas::unit();
    let totals: Vec<Vec<f64>> = cost_matrix(gt, est, &unit).iter().map(|r| r.iter().map(|c| c.total).collect()).collect();
    let pairs = nearest_pairs(&totals);
    if pairs.len() < 2 {
        return *defaults;
    }
    let delay: Vec<f64> = pairs.iter().map(|&(g, e)| gt[g].delay - est[e].delay).collect();
    let angle: Vec<f64> = pairs.iter().map(|&(g, e)| geodesic(&gt[g], &est[e])).collect();
    let gain: Vec<f64> = pairs.iter().map(|&(g, e)| gain_ratio_db(&gt[g], &est[e])).collect();
    let pick = |s: f64, d: f64| if s.is_finite() && s > 0.0 { s } else { d };
    Sigmas { delay: pick(zero_mean_std(&delay), defaults.delay), angle: pick(zero_mean_std(&angle), defaults.angle), gain_db: pick(zero_mean_std(&gain), defaults.gain_db) }
}

/// Two-pass association: empirical sigmas, then the gated matching.
pub fn associate_empirical(gt: &[MpcParam], est: &[MpcParam], defaults: &Sigmas, c_um: f64) -> AssociationResult {
    let sigmas = empirical_sigmas(gt, est, defaults);
    associate(gt, est, &sigmas, c_um)
}
