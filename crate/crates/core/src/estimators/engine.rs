//! Mutable extraction state shared by the three algorithms: accepted paths,
//! the current inner-product weighting and the explicit residual.

use num_complex::Complex64;

use super::config::EstimatorConfig;
use super::estimate::{EstimateSet, EstimatedMpc};
use super::ls::ls_amplitudes;
use crate::beamspace::{Evaluator, Kron, Metric, ModelVector, Mu, SearchGrid, SounderModel};
use crate::error::Result;
use crate::synthesis::MeasurementSet;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, PartialEq)]
pub struct PathState {
    pub mu: Mu,
    pub amp: Complex64,
    pub iteration: usize,
    pub relvar: Option<f64>,
}

pub struct Workspace<'a> {
    pub model: &'a SounderModel,
    pub cfg: &'a EstimatorConfig,
    pub grid: SearchGrid,
    pub data: Vec<Vec<Complex64>>,
    pub metric: Metric,
    pub wdata: Vec<Vec<Complex64>>,
    pub paths: Vec<PathState>,
    pub mvs: Vec<ModelVector>,
    pub residual: Vec<Vec<Complex64>>,
    pub wresidual: Vec<Vec<Complex64>>,
    pub energy: f64,
    pub noise_var: f64,
    pub iteration: usize,
    pub out: EstimateSet,
}

fn energy(t: &[Vec<Complex64>]) -> f64 {
    t.iter().flatten().map(|c| c.norm_sqr()).sum()
}

fn cross(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u.conj() * v).re).sum::<f64>()).sum()
}

impl<'a> Workspace<'a> {
    pub fn new(model: &'a SounderModel, measurement: &MeasurementSet, cfg: &'a EstimatorConfig, algorithm: &str) -> Self {
        let n = model.config.n_freq;
        let data = measurement.tensors.clone();
        let noise_var = measurement.config.noise_variance();
        Workspace {
            model,
            cfg,
            grid: SearchGrid::new(&model.config, cfg.coarse_os, cfg.fine_os),
            energy: energy(&data),
            metric: Metric::identity(n),
            wdata: data.clone(),
            residual: data.clone(),
            wresidual: data.clone(),
            data,
            paths: Vec::new(),
            mvs: Vec::new(),
            noise_var,
            iteration: 0,
            out: EstimateSet::empty(algorithm),
        }
    }

    /// Restores accepted paths from an earlier run (amplitudes kept as given).
    pub fn seed(&mut self, est: &EstimateSet) {
        self.paths = est
            .mpcs
            .iter()
            .map(|m| PathState { mu: m.mu, amp: m.amp, iteration: m.iteration_found, relvar: m.relvar })
            .collect();
        self.iteration = est.mpcs.iter().map(|m| m.iteration_found + 1).max().unwrap_or(0).max(est.nmse_trajectory.len());
        self.out = EstimateSet { algorithm: self.out.algorithm.clone(), mpcs: Vec::new(), ..est.clone() };
        self.rebuild_vectors();
        self.recompute_residuals();
    }

    pub fn set_metric(&mut self, metric: Metric) {
        let e = self.model.config.elements();
        self.wdata = self.data.iter().map(|t| metric.whiten(t, e)).collect();
        self.metric = metric;
        self.rebuild_vectors();
        self.recompute_residuals();
    }

    pub fn rebuild_vectors(&mut self) {
        self.mvs = self.paths.iter().map(|p| self.model.model_vector(p.mu, &self.metric)).collect();
    }

    /// `W h` per rotation (the weighting touches only the frequency factor).
    pub fn whitened(&self, mv: &ModelVector) -> Vec<Kron> {
        if self.metric.is_identity() {
            return mv.rot.clone();
        }
        let w = self.metric.inverse().expect("non-identity metric has an inverse");
        let n = self.metric.len();
        mv.rot
            .iter()
            .map(|k| {
                let s = (0..n).map(|r| w[r * n..(r + 1) * n].iter().zip(&k.s).map(|(a, b)| a * b).sum()).collect();
                Kron { s, ay: k.ay.clone(), ax: k.ax.clone() }
            })
            .collect()
    }

    pub fn recompute_residuals(&mut self) {
        let mut r = self.data.clone();
        let mut wr = self.wdata.clone();
        for (p, mv) in self.paths.iter().zip(&self.mvs) {
            mv.add_to(-p.amp, &mut r);
            for (h, o) in self.whitened(mv).iter().zip(wr.iter_mut()) {
                h.add_to(-p.amp, o);
            }
        }
        self.residual = r;
        self.wresidual = wr;
    }

    /// Adds `c·h` to both residuals.
    pub fn shift_residual(&mut self, mv: &ModelVector, c: Complex64) {
        mv.add_to(c, &mut self.residual);
        let wh = self.whitened(mv);
        for (h, o) in wh.iter().zip(self.wresidual.iter_mut()) {
            h.add_to(c, o);
        }
    }

    pub fn residual_energy(&self) -> f64 {
        energy(&self.residual)
    }

    /// `rᴴ W r` for the current residual.
    pub fn weighted_cost(&self) -> f64 {
        cross(&self.residual, &self.wresidual)
    }

    pub fn nmse(&self) -> f64 {
        if self.energy > 0.0 {
            self.residual_energy() / self.energy
        } else {
            0.0
        }
    }

    pub fn evaluator(&self) -> Evaluator<'_> {
        Evaluator::new(self.model, &self.metric, &self.wresidual)
    }

    /// Matched-filter amplitude of `mv` against the weighted residual.
    pub fn matched_amplitude(&self, mv: &ModelVector) -> Complex64 {
        if mv.norm2 > 0.0 {
            mv.apply(&self.wresidual) / mv.norm2
        } else {
            ZERO
        }
    }

    pub fn push_path(&mut self, mu: Mu, amp: Complex64) {
        let mv = self.model.model_vector(mu, &self.metric);
        self.shift_residual(&mv, -amp);
        self.paths.push(PathState { mu, amp, iteration: self.iteration, relvar: None });
        self.mvs.push(mv);
    }

    pub fn pop_path(&mut self) {
        if let (Some(p), Some(mv)) = (self.paths.pop(), self.mvs.pop()) {
            self.shift_residual(&mv, p.amp);
        }
    }

    pub fn amplitudes(&self) -> Vec<Complex64> {
        self.paths.iter().map(|p| p.amp).collect()
    }

    pub fn set_amplitudes(&mut self, amps: &[Complex64]) {
        for (p, a) in self.paths.iter_mut().zip(amps) {
            p.amp = *a;
        }
        self.recompute_residuals();
    }

    /// Least-squares (or generalized least-squares) refresh of all amplitudes.
    pub fn ls_refresh(&mut self) -> Result<()> {
        let amps = ls_amplitudes(&self.mvs, &self.wdata, &self.metric)?;
        self.set_amplitudes(&amps);
        Ok(())
    }

    /// Weighted residual cost with each path at its own matched-filter
    /// amplitude against the full data.
    pub fn matched_filter_cost(&self) -> f64 {
        let mut r = self.data.clone();
        let mut wr = self.wdata.clone();
        for mv in &self.mvs {
            let a = mv.apply(&self.wdata) / mv.norm2;
            mv.add_to(-a, &mut r);
            for (h, o) in self.whitened(mv).iter().zip(wr.iter_mut()) {
                h.add_to(-a, o);
            }
        }
        cross(&r, &wr)
    }

    /// Strongest accepted path energy `|α|²·hᴴWh`.
    pub fn strongest_power(&self) -> f64 {
        self.paths.iter().zip(&self.mvs).map(|(p, m)| p.amp.norm_sqr() * m.norm2).fold(0.0, f64::max)
    }

    pub fn record(&mut self) {
        let nmse = self.nmse();
        self.out.nmse_trajectory.push(nmse);
        self.out.residual_power_trajectory.push(self.residual_energy());
    }

    pub fn finish(mut self) -> EstimateSet {
        self.out.mpcs = self
            .paths
            .iter()
            .map(|p| EstimatedMpc { relvar: p.relvar, ..EstimatedMpc::new(p.mu, p.amp, p.iteration) })
            .collect();
        self.out
    }

    pub fn period(&self) -> f64 {
        self.model.config.duration_t
    }
}
