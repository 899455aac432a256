//! Candidate regions from the composite 3D beamspace PDP: per-axis marginal
//! peaks, their Cartesian product, a 3D threshold and a half-bin merge.

use std::f64::consts::TAU;

use crate::beamspace::{GridValues, Mu, SearchGrid};
use crate::geometry::angle_diff;

/// One search region: a resolution bin centered on `center`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub center: Mu,
    pub value: f64,
}

fn marginal(gv: &GridValues, axis: usize) -> Vec<f64> {
    let (na, ne, nt) = gv.dims();
    let len = [na, ne, nt][axis];
    let mut out = vec![0.0; len];
    for e in 0..ne {
        for a in 0..na {
            if !gv.active[a] {
                continue;
            }
            for t in 0..nt {
                let i = [a, e, t][axis];
                out[i] += gv.at(a, e, t);
            }
        }
    }
    out
}

/// Indices of local maxima within `gamma` of the maximum. Plateaus report
/// their first sample.
fn peaks(v: &[f64], circular: bool, gamma: f64) -> Vec<usize> {
    let n = v.len();
    let max = v.iter().cloned().fold(0.0, f64::max);
    if n == 0 || max <= 0.0 {
        return Vec::new();
    }
    let floor = max * gamma;
    (0..n)
        .filter(|&i| {
            let left = if i > 0 {
                Some(v[i - 1])
            } else if circular {
                Some(v[n - 1])
            } else {
                None
            };
            let right = if i + 1 < n {
                Some(v[i + 1])
            } else if circular {
                Some(v[0])
            } else {
                None
            };
            v[i] >= floor && v[i] > 0.0 && left.is_none_or(|l| v[i] > l) && right.is_none_or(|r| v[i] >= r)
        })
        .collect()
}

fn is_circular(values: &[f64], period: f64) -> bool {
    values.len() > 1 && ((values[1] - values[0]) * values.len() as f64 - period).abs() < 1e-9 * period
}

/// Ordered (strongest first) regions, at most `limit` of them. Empty when
/// nothing clears the thresholds.
pub fn find_search_regions(gv: &GridValues, grid: &SearchGrid, gamma_peak_db: f64, period: f64, limit: usize) -> Vec<Region> {
    let gamma = 10f64.powf(-gamma_peak_db / 10.0);
    let pa = peaks(&marginal(gv, 0), is_circular(&gv.az, TAU), gamma);
    let pe = peaks(&marginal(gv, 1), false, gamma);
    let pt = peaks(&marginal(gv, 2), is_circular(&gv.delay, period), gamma);
    let mut cand: Vec<(usize, usize, usize, f64)> = Vec::new();
    for &e in &pe {
        for &a in &pa {
            for &t in &pt {
                cand.push((a, e, t, gv.at(a, e, t)));
            }
        }
    }
    let top = cand.iter().map(|c| c.3).fold(0.0, f64::max);
    cand.retain(|c| c.3 > 0.0 && c.3 >= top * gamma);
    cand.sort_by(|x, y| y.3.total_cmp(&x.3));

    let [ba, be, bt] = grid.bins();
    let mut out: Vec<Region> = Vec::new();
    for (a, e, t, v) in cand {
        if out.len() >= limit {
            break;
        }
        let mu = gv.mu(a, e, t);
        let dup = out.iter().any(|r| {
            angle_diff(r.center.az, mu.az).abs() < ba / 2.0
                && (r.center.el - mu.el).abs() < be / 2.0
                && delay_diff(r.center.delay, mu.delay, period).abs() < bt / 2.0
        });
        if !dup {
            out.push(Region { center: mu, value: v });
        }
    }
    out
}

/// Signed circular delay difference in `[-period/2, period/2)`.
pub fn delay_diff(a: f64, b: f64, period: f64) -> f64 {
    (a - b + period / 2.0).rem_euclid(period) - period / 2.0
}
