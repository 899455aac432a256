//! Single-path update: coarse argmax of the matched-filter objective
//! followed by a fine search around it.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::beamspace::{DelaySpec, Evaluator, GridValues, Mu, SearchGrid};
use crate::geometry::wrap_2pi;

/// Maximum number of times a fine box is recentered when its best point lies on the boundary.
pub const MAX_RECENTER: usize = 8;

pub const POLISH_ROUNDS: usize = 3;

/// Relative objective gap within which the fine-lattice point is preferred
/// over a sub-grid refinement.
pub const SNAP_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub mu: Mu,
    pub amp: Complex64,
    pub objective: f64,
}

#[derive(Debug, Clone, Copy)]
struct BoxHit {
    mu: Mu,
    value: f64,
    edge: [bool; 3],
}

/// Objective on the box `center ± half·step` (per axis) and its best point;
/// `None` when every cell is outside the field of view.
fn evaluate_box(ev: &Evaluator, center: Mu, steps: [f64; 3], half: [usize; 3], period: f64) -> Option<(GridValues, BoxHit)> {
    let pts = |c: f64, s: f64, h: usize| -> Vec<f64> { (0..=2 * h).map(|j| c + (j as f64 - h as f64) * s).collect() };
    let az: Vec<f64> = pts(center.az, steps[0], half[0]).into_iter().map(wrap_2pi).collect();
    let mut el: Vec<f64> = pts(center.el, steps[1], half[1]).into_iter().map(|e| e.clamp(0.0, PI)).collect();
    el.dedup();
    let delay: Vec<f64> = pts(center.delay, steps[2], half[2]).into_iter().map(|t| t.rem_euclid(period)).collect();
    let gv = ev.evaluate(&az, &el, &DelaySpec::List(delay));
    let (a, e, t, v) = gv.argmax()?;
    let el_edge = (e == 0 && gv.el[0] > 0.0) || (e + 1 == gv.el.len() && gv.el[e] < PI);
    let hit = BoxHit {
        mu: gv.mu(a, e, t),
        value: v,
        edge: [half[0] > 0 && (a == 0 || a + 1 == gv.az.len()), half[1] > 0 && el_edge, half[2] > 0 && (t == 0 || t + 1 == gv.delay.len())],
    };
    Some((gv, hit))
}

fn search_box(ev: &Evaluator, center: Mu, steps: [f64; 3], half: [usize; 3], period: f64) -> Option<BoxHit> {
    evaluate_box(ev, center, steps, half, period).map(|x| x.1)
}

/// Fine box of one bin (`±fine_os/2` steps) around `start`, recentered while
/// the maximum sits on an edge.
pub fn fine_search(ev: &Evaluator, grid: &SearchGrid, start: Mu, climb: usize, refine: bool) -> Option<(Mu, f64)> {
    let period = ev.model().config.duration_t;
    let h = (grid.fine_os / 2).max(1);
    let mut hit = search_box(ev, start, grid.fine_steps(), [h; 3], period)?;
    for _ in 0..climb {
        if !hit.edge.iter().any(|&b| b) {
            break;
        }
        let next = search_box(ev, hit.mu, grid.fine_steps(), [h; 3], period)?;
        if next.value <= hit.value {
            break;
        }
        hit = next;
    }
    Some(if refine { polish(ev, grid, hit.mu, hit.value) } else { (hit.mu, hit.value) })
}

/// Sub-grid refinement on a shrinking 3×3×3 stencil: recenter on the best
/// stencil point, otherwise step to the per-axis parabolic vertex when that
/// improves the objective. The nearest fine-lattice point wins when it is
/// within [`SNAP_TOL`] of the refined value.
pub fn polish(ev: &Evaluator, grid: &SearchGrid, mu: Mu, value: f64) -> (Mu, f64) {
    let period = ev.model().config.duration_t;
    let (mut best, mut best_v) = (mu, value);
    let mut h = grid.fine_steps();
    let mut budget = POLISH_ROUNDS + MAX_RECENTER;
    let mut rounds = 0;
    while rounds < POLISH_ROUNDS && budget > 0 {
        budget -= 1;
        let Some((gv, hit)) = evaluate_box(ev, best, h, [1; 3], period) else { break };
        if hit.value > best_v {
            best = hit.mu;
            best_v = hit.value;
            continue;
        }
        rounds += 1;
        if gv.az.len() == 3 && gv.el.len() == 3 && gv.delay.len() == 3 {
            let mut p = [best.az, best.el, best.delay];
            for (axis, x) in p.iter_mut().enumerate() {
                let at = |j: usize| {
                    let mut i = [1, 1, 1];
                    i[axis] = j;
                    gv.at(i[0], i[1], i[2])
                };
                let (l, c, r) = (at(0), at(1), at(2));
                let curv = l - 2.0 * c + r;
                if curv < 0.0 {
                    *x += (0.5 * (l - r) / curv).clamp(-1.0, 1.0) * h[axis];
                }
            }
            let cand = Mu::new(wrap_2pi(p[0]), p[1].clamp(0.0, PI), p[2].rem_euclid(period));
            let v = ev.objective(cand);
            if v > best_v {
                best = cand;
                best_v = v;
            }
        }
        h = h.map(|x| x / 4.0);
    }
    let snapped = grid.snap(best);
    let v = ev.objective(snapped);
    if v >= best_v * (1.0 - SNAP_TOL) {
        return (snapped, v);
    }
    (best, best_v)
}

/// Coarse search over `center ± coarse_bins` resolution bins at the coarse
/// step, then [`fine_search`].
pub fn local_search(ev: &Evaluator, grid: &SearchGrid, center: Mu, coarse_bins: f64, climb: usize, refine: bool) -> Option<(Mu, f64)> {
    let period = ev.model().config.duration_t;
    let os = grid.coarse_os as f64;
    let steps = grid.bins().map(|b| b / os);
    let h = (coarse_bins * os).floor() as usize;
    let coarse = search_box(ev, center, steps, [h; 3], period)?;
    let (mu, v) = fine_search(ev, grid, coarse.mu, climb, refine)?;
    Some(if v >= coarse.value { (mu, v) } else { (coarse.mu, coarse.value) })
}

/// Candidate from a region (or the full-grid argmax when `region` is `None`)
/// with its stacked matched-filter amplitude.
pub fn single_mpc_update(ev: &Evaluator, grid: &SearchGrid, region: Option<Mu>, refine: bool) -> Option<Candidate> {
    let (mu, value) = match region {
        Some(c) => local_search(ev, grid, c, 0.5, MAX_RECENTER, refine)?,
        None => {
            let gv = ev.evaluate(&grid.az_values(), &grid.el_values(), &grid.delay_spec());
            let (a, e, t, _) = gv.argmax()?;
            fine_search(ev, grid, gv.mu(a, e, t), MAX_RECENTER, refine)?
        }
    };
    let mv = ev.model().model_vector(mu, ev.metric());
    if mv.norm2 <= 0.0 {
        return None;
    }
    Some(Candidate { mu: mu.normalized(ev.model().config.duration_t), amp: ev.project(&mv) / mv.norm2, objective: value })
}
