use serde::{Deserialize, Serialize};

use super::dmc::DmcModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DmcSettings {
    pub max_outer_iters: usize,
    pub convergence: f64,
    pub max_fit_iters: u64,
    /// Holds the diffuse model fixed instead of fitting it.
    pub frozen: Option<DmcModel>,
}

impl Default for DmcSettings {
    fn default() -> Self {
        DmcSettings { max_outer_iters: 4, convergence: 1e-3, max_fit_iters: 400, frozen: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    pub gamma_peak_db: f64,
    pub gamma_det_db: f64,
    pub closeness_fraction: f64,
    pub nmse_tol: f64,
    pub max_mpcs: usize,
    pub consecutive_rejects_stop: usize,
    pub coarse_os: usize,
    pub fine_os: usize,
    pub relvar_threshold: f64,
    pub sage_inner_iters: usize,
    pub dmc: DmcSettings,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            gamma_peak_db: 20.0,
            gamma_det_db: 40.0,
            closeness_fraction: 0.5,
            nmse_tol: 0.01,
            max_mpcs: 50,
            consecutive_rejects_stop: 10,
            coarse_os: 2,
            fine_os: 8,
            relvar_threshold: 0.1,
            sage_inner_iters: 3,
            dmc: DmcSettings::default(),
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.gamma_peak_db > 0.0) {
            return bad("gamma_peak_db must be positive");
        }
        if !(self.gamma_det_db > 0.0) {
            return bad("gamma_det_db must be positive");
        }
        if !(self.nmse_tol > 0.0 && self.nmse_tol <= 0.1) {
            return bad("nmse_tol must lie in (0, 0.1]");
        }
        if self.coarse_os < 1 || self.fine_os < 1 {
            return bad("oversampling factors must be at least 1");
        }
        if !(self.closeness_fraction > 0.0) || !(self.relvar_threshold > 0.0) {
            return bad("closeness_fraction and relvar_threshold must be positive");
        }
        if self.max_mpcs == 0 || self.consecutive_rejects_stop == 0 {
            return bad("max_mpcs and consecutive_rejects_stop must be at least 1");
        }
        Ok(())
    }
}
