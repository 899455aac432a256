//! Extraction results and their JSON file form (degrees, nanoseconds).

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::config::EstimatorConfig;
use super::dmc::DmcModel;
use crate::beamspace::Mu;
use crate::config::SounderConfig;
use crate::error::{Error, Result};
use crate::geometry::{rad, wrap_2pi};
use crate::mpc::{MpcParam, PolAmplitude};

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatedMpc {
    pub mu: Mu,
    pub amp: Complex64,
    pub power_db: f64,
    pub iteration_found: usize,
    pub relvar: Option<f64>,
}

impl EstimatedMpc {
    pub fn new(mu: Mu, amp: Complex64, iteration_found: usize) -> Self {
        EstimatedMpc { mu, amp, power_db: 10.0 * amp.norm_sqr().log10(), iteration_found, relvar: None }
    }

    pub fn to_mpc(&self, id: i64) -> MpcParam {
        MpcParam { id, az_global: wrap_2pi(self.mu.az), el_global: self.mu.el, delay: self.mu.delay, amp: PolAmplitude::co_polar(self.amp) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Power,
    Closeness,
    Fov,
    RelativeVariance,
    Conditioning,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectionRecord {
    pub iteration: usize,
    pub mu: Mu,
    pub amp: Complex64,
    pub criterion: Criterion,
    /// Named statistic values that triggered the rejection.
    pub values: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tolerance,
    NmseIncrease,
    Rejections,
    MaxMpcs,
    Exhausted,
    IterationLimit,
    Converged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSet {
    pub algorithm: String,
    pub mpcs: Vec<EstimatedMpc>,
    pub nmse_trajectory: Vec<f64>,
    pub residual_power_trajectory: Vec<f64>,
    pub rejection_log: Vec<RejectionRecord>,
    pub dmc_params: Option<DmcModel>,
    pub stop_reason: Option<StopReason>,
}

impl EstimateSet {
    pub fn empty(algorithm: &str) -> Self {
        EstimateSet {
            algorithm: algorithm.to_string(),
            mpcs: Vec::new(),
            nmse_trajectory: Vec::new(),
            residual_power_trajectory: Vec::new(),
            rejection_log: Vec::new(),
            dmc_params: None,
            stop_reason: None,
        }
    }

    pub fn to_mpcs(&self) -> Vec<MpcParam> {
        self.mpcs.iter().enumerate().map(|(i, m)| m.to_mpc(i as i64)).collect()
    }

    pub fn final_nmse(&self) -> Option<f64> {
        self.nmse_trajectory.last().copied()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MpcRecord {
    pub az_deg: f64,
    pub el_deg: f64,
    pub delay_ns: f64,
    pub amp_re: f64,
    pub amp_im: f64,
    pub power_db: f64,
    pub iteration_found: usize,
    pub relvar: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RejectionEntry {
    pub iteration: usize,
    pub az_deg: f64,
    pub el_deg: f64,
    pub delay_ns: f64,
    pub amp_re: f64,
    pub amp_im: f64,
    pub criterion: Criterion,
    pub values: std::collections::BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateFile {
    pub algorithm: String,
    pub mpcs: Vec<MpcRecord>,
    pub nmse_trajectory: Vec<f64>,
    pub residual_power_trajectory: Vec<f64>,
    pub rejection_log: Vec<RejectionEntry>,
    pub dmc_params: Option<DmcModel>,
    pub stop_reason: Option<StopReason>,
    pub sounder: SounderConfig,
    pub estimator: EstimatorConfig,
    pub measurement_hash: String,
    #[serde(default)]
    pub measurement_path: Option<String>,
}

fn mu_deg(mu: &Mu) -> (f64, f64, f64) {
    (mu.az.to_degrees(), mu.el.to_degrees(), mu.delay * 1e9)
}

impl EstimateFile {
    pub fn new(est: &EstimateSet, sounder: &SounderConfig, estimator: &EstimatorConfig, measurement_hash: &str, measurement_path: Option<String>) -> Self {
        let mpcs = est
            .mpcs
            .iter()
            .map(|m| {
                let (az_deg, el_deg, delay_ns) = mu_deg(&m.mu);
                MpcRecord { az_deg, el_deg, delay_ns, amp_re: m.amp.re, amp_im: m.amp.im, power_db: m.power_db, iteration_found: m.iteration_found, relvar: m.relvar }
            })
            .collect();
        let rejection_log = est
            .rejection_log
            .iter()
            .map(|r| {
                let (az_deg, el_deg, delay_ns) = mu_deg(&r.mu);
                RejectionEntry {
                    iteration: r.iteration,
                    az_deg,
                    el_deg,
                    delay_ns,
                    amp_re: r.amp.re,
                    amp_im: r.amp.im,
                    criterion: r.criterion,
                    values: r.values.iter().cloned().collect(),
                }
            })
            .collect();
        EstimateFile {
            algorithm: est.algorithm.clone(),
            mpcs,
            nmse_trajectory: est.nmse_trajectory.clone(),
            residual_power_trajectory: est.residual_power_trajectory.clone(),
            rejection_log,
            dmc_params: est.dmc_params,
            stop_reason: est.stop_reason,
            sounder: sounder.clone(),
            estimator: estimator.clone(),
            measurement_hash: measurement_hash.to_string(),
            measurement_path,
        }
    }

    pub fn estimate_set(&self) -> EstimateSet {
        EstimateSet {
            algorithm: self.algorithm.clone(),
            mpcs: self
                .mpcs
                .iter()
                .map(|m| EstimatedMpc {
                    mu: Mu::new(wrap_2pi(rad(m.az_deg)), rad(m.el_deg), m.delay_ns * 1e-9),
                    amp: Complex64::new(m.amp_re, m.amp_im),
                    power_db: m.power_db,
                    iteration_found: m.iteration_found,
                    relvar: m.relvar,
                })
                .collect(),
            nmse_trajectory: self.nmse_trajectory.clone(),
            residual_power_trajectory: self.residual_power_trajectory.clone(),
            rejection_log: self
                .rejection_log
                .iter()
                .map(|r| RejectionRecord {
                    iteration: r.iteration,
                    mu: Mu::new(rad(r.az_deg), rad(r.el_deg), r.delay_ns * 1e-9),
                    amp: Complex64::new(r.amp_re, r.amp_im),
                    criterion: r.criterion,
                    values: r.values.clone().into_iter().collect(),
                })
                .collect(),
            dmc_params: self.dmc_params,
            stop_reason: self.stop_reason,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }
}
