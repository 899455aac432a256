//! Candidate screening: power, closeness, field-of-view consistency and
//! (optionally) the Fisher relative-variance bound.

use std::f64::consts::PI;

use super::engine::Workspace;
use super::estimate::Criterion;
use super::fisher::fisher_relative_variance;
use super::regions::delay_diff;
use super::update::Candidate;
use crate::beamspace::{Mu, SounderModel};
use crate::geometry::{angle_diff, wrap_2pi, wrap_pi};

#[derive(Debug, Clone, PartialEq)]
pub enum Decision {
    Accept { relvar: Option<f64> },
    Reject(Criterion, Vec<(String, f64)>),
}

/// Azimuth reflected about the array plane of rotation `rot`.
pub fn mirror_about(az: f64, rot: f64) -> f64 {
    wrap_2pi(wrap_pi(PI - wrap_pi(az - rot)) + rot)
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    const EPS: f64 = 1e-12;
    p.iter().zip(q).filter(|(a, _)| **a > 0.0).map(|(a, b)| a * (a / b.max(EPS)).ln()).sum()
}

/// KL distances from the measured per-rotation power profile to the one
/// expected under each azimuth hypothesis (original first, then one mirror
/// per rotation).
pub fn fov_distances(ws: &Workspace, mu: Mu) -> Vec<(f64, f64)> {
    let model: &SounderModel = ws.model;
    let metric = &ws.metric;
    let mv = model.model_vector(mu, metric);
    let wy: Vec<_> = ws.wresidual.iter().collect();
    let mut measured: Vec<f64> = mv
        .rot
        .iter()
        .zip(&wy)
        .zip(&mv.norms)
        .map(|((h, y), n)| if *n > 0.0 { h.apply(y).norm_sqr() / n } else { 0.0 })
        .collect();
    normalize(&mut measured);
    let mut hyps = vec![mu.az];
    hyps.extend(model.config.rotations.iter().map(|&r| mirror_about(mu.az, r)));
    hyps.into_iter()
        .map(|az| {
            let other = model.model_vector(Mu { az, ..mu }, metric);
            let mut expected: Vec<f64> = mv
                .rot
                .iter()
                .zip(&other.rot)
                .zip(&mv.norms)
                .map(|((a, b), n)| if *n > 0.0 { a.inner(b, metric).norm_sqr() / n } else { 0.0 })
                .collect();
            normalize(&mut expected);
            (az, kl(&measured, &expected))
        })
        .collect()
}

pub fn reject_candidate(c: &Candidate, ws: &Workspace, noise_floor: f64, use_relvar: bool) -> Decision {
    let cfg = ws.cfg;
    let mv = ws.model.model_vector(c.mu, &ws.metric);
    let power = c.amp.norm_sqr() * mv.norm2;
    let strongest = ws.strongest_power();
    let det = strongest * 10f64.powf(-cfg.gamma_det_db / 10.0);
    if power <= noise_floor || (strongest > 0.0 && power < det) {
        return Decision::Reject(
            Criterion::Power,
            vec![("power".into(), power), ("noise_floor".into(), noise_floor), ("strongest".into(), strongest)],
        );
    }

    let [ba, be, bt] = ws.grid.bins();
    let f = cfg.closeness_fraction;
    let period = ws.period();
    for p in &ws.paths {
        let (da, de, dt) = (angle_diff(p.mu.az, c.mu.az), (p.mu.el - c.mu.el).abs(), delay_diff(p.mu.delay, c.mu.delay, period).abs());
        if da < f * ba && de < f * be && dt < f * bt {
            return Decision::Reject(Criterion::Closeness, vec![("d_az".into(), da), ("d_el".into(), de), ("d_delay".into(), dt)]);
        }
    }

    if ws.model.n_rot() > 1 {
        let d = fov_distances(ws, c.mu);
        let own = d[0].1;
        if let Some(&(az, best)) = d[1..].iter().filter(|x| angle_diff(x.0, c.mu.az) > 1e-9).min_by(|a, b| a.1.total_cmp(&b.1)) {
            if best < own {
                return Decision::Reject(Criterion::Fov, vec![("kl_original".into(), own), ("kl_mirror".into(), best), ("mirror_az".into(), az)]);
            }
        }
    }

    if use_relvar {
        let rv = fisher_relative_variance(ws.model, &ws.metric, c.mu, c.amp, ws.noise_var);
        if !(rv <= cfg.relvar_threshold) {
            return Decision::Reject(Criterion::RelativeVariance, vec![("relvar".into(), rv), ("threshold".into(), cfg.relvar_threshold)]);
        }
        return Decision::Accept { relvar: Some(rv) };
    }
    Decision::Accept { relvar: None }
}
