//! Joint specular/diffuse estimation: alternates a diffuse covariance fit on
//! the specular residual with whitened detection and refinement.

use std::sync::Arc;

use super::clean::{clean_with_model, detect};
use super::config::EstimatorConfig;
use super::dmc::{fit_dmc, sample_covariance, DmcModel};
use super::engine::Workspace;
use super::estimate::{EstimateSet, StopReason};
use super::sage::{sage_with_model, sweeps};
use crate::beampattern::BeampatternGrid;
use crate::beamspace::{Metric, SounderModel};
use crate::error::Result;
use crate::synthesis::MeasurementSet;

/// Diffuse powers below this (in noise units) are treated as absent.
pub const DMC_FLOOR: f64 = 1e-6;

/// Noise reference for whitening: the configured noise variance, or a tiny
/// fraction of the mean sample power for noise-free data.
pub fn reference_variance(measurement: &MeasurementSet) -> f64 {
    let nv = measurement.config.noise_variance();
    if nv > 0.0 {
        return nv;
    }
    let n = measurement.tensors.iter().map(|t| t.len()).sum::<usize>().max(1);
    (1e-12 * measurement.energy() / n as f64).max(f64::MIN_POSITIVE)
}

fn estimate_dmc(ws: &Workspace, noise_var: f64) -> DmcModel {
    if let Some(frozen) = ws.cfg.dmc.frozen {
        return frozen;
    }
    let cfgs = &ws.model.config;
    let scov = sample_covariance(&ws.residual, cfgs.elements(), cfgs.n_freq, noise_var);
    match fit_dmc(&scov, cfgs.n_freq, cfgs.duration_t, ws.cfg.dmc.max_fit_iters) {
        Ok(m) if m.base_power < DMC_FLOOR && m.peak_power < DMC_FLOOR => DmcModel::zero(),
        Ok(m) => m,
        Err(e) => {
            log::warn!("diffuse fit failed ({e}); keeping white noise");
            DmcModel::zero()
        }
    }
}

fn metric_for(dmc: &DmcModel, n: usize, duration_t: f64) -> Metric {
    if dmc.is_zero() {
        return Metric::identity(n);
    }
    match dmc.covariance(n, duration_t) {
        Ok(c) => c.metric(),
        Err(e) => {
            log::warn!("diffuse covariance unusable ({e}); keeping white noise");
            Metric::identity(n)
        }
    }
}

/// Continues from a refined specular estimate (normally the output of
/// [`super::sage::sage_refine`]).
pub fn rimax_from(measurement: &MeasurementSet, pattern: &Arc<BeampatternGrid>, seed: &EstimateSet, cfg: &EstimatorConfig) -> Result<EstimateSet> {
    measurement.validate()?;
    cfg.validate()?;
    let model = SounderModel::new(&measurement.config, pattern.clone());
    Ok(rimax_with_model(&model, measurement, seed, cfg))
}

pub fn rimax_extract(measurement: &MeasurementSet, pattern: &Arc<BeampatternGrid>, cfg: &EstimatorConfig) -> Result<EstimateSet> {
    measurement.validate()?;
    cfg.validate()?;
    let model = SounderModel::new(&measurement.config, pattern.clone());
    let clean = clean_with_model(&model, measurement, cfg);
    let sage = sage_with_model(&model, measurement, &clean, cfg);
    Ok(rimax_with_model(&model, measurement, &sage, cfg))
}

fn rimax_with_model(model: &SounderModel, measurement: &MeasurementSet, seed: &EstimateSet, cfg: &EstimatorConfig) -> EstimateSet {
    let mut ws = Workspace::new(model, measurement, cfg, "rimax");
    ws.seed(seed);
    let sigma2 = reference_variance(measurement);
    ws.noise_var = sigma2;
    let (n, t) = (model.config.n_freq, model.config.duration_t);
    let mut prev: Option<DmcModel> = None;
    let mut reason = StopReason::IterationLimit;
    for _ in 0..cfg.dmc.max_outer_iters.max(1) {
        let dmc = estimate_dmc(&ws, sigma2);
        ws.out.dmc_params = Some(dmc);
        let settled = prev.is_some_and(|p| dmc.relative_change(&p, n, t) < cfg.dmc.convergence);
        let metric = metric_for(&dmc, n, t);
        if settled || (metric.is_identity() && ws.metric.is_identity()) {
            reason = StopReason::Converged;
            break;
        }
        ws.set_metric(metric);
        let saved = ws.amplitudes();
        if ws.ls_refresh().is_err() {
            ws.set_amplitudes(&saved);
        }
        reason = detect(&mut ws, true);
        sweeps(&mut ws);
        if cfg.dmc.frozen.is_some() {
            reason = StopReason::Converged;
            break;
        }
        prev = Some(dmc);
    }
    ws.out.stop_reason = Some(reason);
    ws.finish()
}
