//! Greedy successive detection: region search, single-path update,
//! screening, joint amplitude refresh and explicit residual update.

use std::sync::Arc;

use super::config::EstimatorConfig;
use super::engine::Workspace;
use super::estimate::{Criterion, EstimateSet, RejectionRecord, StopReason};
use super::regions::find_search_regions;
use super::rejection::{reject_candidate, Decision};
use super::stopping::{stopping_check, StopDecision};
use super::update::{single_mpc_update, Candidate};
use crate::beampattern::BeampatternGrid;
use crate::beamspace::SounderModel;
use crate::error::Result;
use crate::synthesis::MeasurementSet;

/// Residual energy (relative to the data) below which nothing is left to detect.
pub const EXHAUSTED: f64 = 1e-24;

fn log_rejection(ws: &mut Workspace, c: &Candidate, criterion: Criterion, values: Vec<(String, f64)>) {
    log::debug!("iteration {}: rejected {:?} ({:?})", ws.iteration, c.mu, criterion);
    ws.out.rejection_log.push(RejectionRecord { iteration: ws.iteration, mu: c.mu, amp: c.amp, criterion, values });
}

/// Runs the detection loop on `ws` under its current metric. The weighted
/// residual cost is the monotone quantity; with the identity metric it is
/// the NMSE numerator.
pub(crate) fn detect(ws: &mut Workspace, use_relvar: bool) -> StopReason {
    let cfg = ws.cfg;
    let period = ws.period();
    if ws.out.nmse_trajectory.is_empty() {
        ws.record();
    }
    let wtotal: f64 = ws.wdata.iter().zip(&ws.data).map(|(w, d)| w.iter().zip(d).map(|(a, b)| (b.conj() * a).re).sum::<f64>()).sum();
    let mut costs = vec![if wtotal > 0.0 { ws.weighted_cost() / wtotal } else { 0.0 }];
    let mut rejects = 0usize;
    let cap = (cfg.max_mpcs + 1) * (cfg.consecutive_rejects_stop + 1);
    let mut regions = Vec::new();
    let mut stale = true;
    let mut floor = 0.0;

    for _ in 0..cap {
        if ws.energy <= 0.0 || ws.residual_energy() <= EXHAUSTED * ws.energy {
            return StopReason::Exhausted;
        }
        if let StopDecision::Stop(r) = stopping_check(&[], rejects, ws.paths.len(), cfg) {
            return r;
        }
        if regions.is_empty() {
            if !stale {
                return StopReason::Rejections;
            }
            let ev = ws.evaluator();
            let gv = ev.evaluate(&ws.grid.az_values(), &ws.grid.el_values(), &ws.grid.delay_spec());
            floor = gv.median();
            let mut found: Vec<_> = find_search_regions(&gv, &ws.grid, cfg.gamma_peak_db, period, cfg.consecutive_rejects_stop + 1).into_iter().map(|r| Some(r.center)).collect();
            if found.is_empty() {
                found.push(None);
            }
            found.reverse();
            regions = found;
            stale = false;
        }
        let region = regions.pop().expect("non-empty region list");
        let cand = {
            let ev = ws.evaluator();
            single_mpc_update(&ev, &ws.grid, region, true)
        };
        ws.iteration += 1;
        let Some(cand) = cand else {
            rejects += 1;
            continue;
        };
        let relvar = match reject_candidate(&cand, ws, floor, use_relvar) {
            Decision::Reject(criterion, values) => {
                log_rejection(ws, &cand, criterion, values);
                rejects += 1;
                continue;
            }
            Decision::Accept { relvar } => relvar,
        };

        let saved = ws.amplitudes();
        ws.push_path(cand.mu, cand.amp);
        if let Some(p) = ws.paths.last_mut() {
            p.relvar = relvar;
        }
        if let Err(e) = ws.ls_refresh() {
            ws.pop_path();
            ws.set_amplitudes(&saved);
            log_rejection(ws, &cand, Criterion::Conditioning, vec![("condition".into(), condition_of(&e))]);
            rejects += 1;
            continue;
        }
        debug_assert!(ws.weighted_cost() <= ws.matched_filter_cost() * (1.0 + 1e-9) + 1e-12 * ws.energy);
        let cost = if wtotal > 0.0 { ws.weighted_cost() / wtotal } else { 0.0 };
        let prev = *costs.last().expect("initial cost");
        if cost > prev {
            ws.pop_path();
            ws.set_amplitudes(&saved);
            return StopReason::NmseIncrease;
        }
        costs.push(cost);
        rejects = 0;
        stale = true;
        regions.clear();
        match stopping_check(&costs, 0, ws.paths.len(), cfg) {
            StopDecision::Stop(StopReason::Tolerance) => {
                ws.pop_path();
                ws.set_amplitudes(&saved);
                return StopReason::Tolerance;
            }
            StopDecision::Stop(r) => {
                ws.record();
                return r;
            }
            StopDecision::Continue => ws.record(),
        }
    }
    StopReason::IterationLimit
}

fn condition_of(e: &crate::error::Error) -> f64 {
    match e {
        crate::error::Error::IllConditioned { cond, .. } => *cond,
        _ => f64::NAN,
    }
}

pub fn clean_extract(measurement: &MeasurementSet, pattern: &Arc<BeampatternGrid>, cfg: &EstimatorConfig) -> Result<EstimateSet> {
    measurement.validate()?;
    cfg.validate()?;
    let model = SounderModel::new(&measurement.config, pattern.clone());
    Ok(clean_with_model(&model, measurement, cfg))
}

pub(crate) fn clean_with_model(model: &SounderModel, measurement: &MeasurementSet, cfg: &EstimatorConfig) -> EstimateSet {
    let mut ws = Workspace::new(model, measurement, cfg, "clean");
    let reason = detect(&mut ws, false);
    ws.out.stop_reason = Some(reason);
    ws.finish()
}
