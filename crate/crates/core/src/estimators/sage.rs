//! Path-wise alternating refinement seeded by detection results.

use std::sync::Arc;

use super::config::EstimatorConfig;
use super::engine::Workspace;
use super::estimate::{EstimateSet, StopReason};
use super::update::{local_search, polish};
use crate::beampattern::BeampatternGrid;
use crate::beamspace::SounderModel;
use crate::error::Result;
use crate::synthesis::MeasurementSet;

/// Number of resolution bins searched around each path in the M-step.
pub const SAGE_REACH: f64 = 1.0;

/// One E/M update of path `k`; returns whether it moved. A move is kept only
/// when it strictly lowers the weighted residual cost.
fn update_path(ws: &mut Workspace, k: usize, local: bool) -> bool {
    let before = ws.weighted_cost();
    let old = ws.paths[k].clone();
    let old_mv = ws.mvs[k].clone();
    ws.shift_residual(&old_mv, old.amp);
    let found = {
        let ev = ws.evaluator();
        if local {
            local_search(&ev, &ws.grid, old.mu, SAGE_REACH, 0, true)
        } else {
            let start = ev.objective(old.mu);
            Some(polish(&ev, &ws.grid, old.mu, start))
        }
    };
    let Some((mu, _)) = found else {
        ws.shift_residual(&old_mv, -old.amp);
        return false;
    };
    let mu = mu.normalized(ws.period());
    let mv = ws.model.model_vector(mu, &ws.metric);
    let amp = ws.matched_amplitude(&mv);
    ws.shift_residual(&mv, -amp);
    if ws.weighted_cost() < before {
        ws.paths[k].mu = mu;
        ws.paths[k].amp = amp;
        ws.mvs[k] = mv;
        true
    } else {
        ws.shift_residual(&mv, amp);
        ws.shift_residual(&old_mv, -old.amp);
        false
    }
}

/// Sweeps all paths up to `sage_inner_iters` times, refreshing amplitudes
/// jointly after each sweep.
pub(crate) fn sweeps(ws: &mut Workspace) -> StopReason {
    for _ in 0..ws.cfg.sage_inner_iters {
        let before = ws.weighted_cost();
        let snapshot = (ws.paths.clone(), ws.mvs.clone());
        let mut moved = false;
        for k in 0..ws.paths.len() {
            moved |= update_path(ws, k, true);
        }
        ws.recompute_residuals();
        let saved = ws.amplitudes();
        let mid = ws.weighted_cost();
        if ws.ls_refresh().is_err() || ws.weighted_cost() > mid {
            ws.set_amplitudes(&saved);
        }
        if ws.weighted_cost() > before {
            // Only rounding in the incremental updates can get here.
            (ws.paths, ws.mvs) = snapshot;
            ws.recompute_residuals();
            moved = false;
        }
        ws.record();
        if !moved {
            return StopReason::Converged;
        }
    }
    StopReason::IterationLimit
}

pub fn sage_refine(measurement: &MeasurementSet, pattern: &Arc<BeampatternGrid>, estimates: &EstimateSet, cfg: &EstimatorConfig) -> Result<EstimateSet> {
    measurement.validate()?;
    cfg.validate()?;
    let model = SounderModel::new(&measurement.config, pattern.clone());
    Ok(sage_with_model(&model, measurement, estimates, cfg))
}

pub(crate) fn sage_with_model(model: &SounderModel, measurement: &MeasurementSet, estimates: &EstimateSet, cfg: &EstimatorConfig) -> EstimateSet {
    let mut ws = Workspace::new(model, measurement, cfg, "sage");
    ws.seed(estimates);
    let reason = sweeps(&mut ws);
    ws.out.stop_reason = Some(reason);
    ws.finish()
}
