use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use mpcest::beampattern::{BeampatternGrid, PatternKind};
use mpcest::config::SounderConfig;
use mpcest::estimators::EstimatorConfig;
use mpcest::evaluation::{Sigmas, DEFAULT_C_UM};
use mpcest::mpc::{load_gt_csv, MpcParam};
use mpcest::scenarios;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SounderSpec {
    Preset {
        preset: String,
        #[serde(default)]
        snr_db: Option<f64>,
        #[serde(default)]
        noise_psd: Option<f64>,
        #[serde(default)]
        tx_power_dbm: Option<f64>,
    },
    Full(SounderConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PatternSpec {
    File { file: PathBuf },
    Analytic {
        kind: PatternKind,
        #[serde(default = "default_exponent")]
        exponent: f64,
        #[serde(default = "default_xpol")]
        xpol_floor_db: f64,
    },
}

fn default_exponent() -> f64 {
    1.0
}

fn default_xpol() -> f64 {
    -15.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioSpec {
    Builtin { builtin: String },
    GtCsv { gt_csv: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssociationSpec {
    pub c_um: f64,
    pub default_sigmas: Sigmas,
}

impl Default for AssociationSpec {
    fn default() -> Self {
        AssociationSpec { c_um: DEFAULT_C_UM, default_sigmas: Sigmas::unit() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub sounder: SounderSpec,
    pub estimator: EstimatorConfig,
    pub pattern: PatternSpec,
    pub scenario: Option<ScenarioSpec>,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub association: AssociationSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            sounder: SounderSpec::Preset { preset: "17x17-1GHz".into(), snr_db: Some(30.0), noise_psd: None, tx_power_dbm: None },
            estimator: EstimatorConfig::default(),
            pattern: PatternSpec::Analytic { kind: PatternKind::CosinePower, exponent: 1.0, xpol_floor_db: -15.0 },
            scenario: None,
            seed: 0,
            output_dir: None,
            association: AssociationSpec::default(),
        }
    }
}

/// Relative paths inside a config file resolve against the file's directory.
fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(RunConfig::default()) };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let PatternSpec::File { file } = &mut cfg.pattern {
            *file = resolve(base, file);
        }
        if let Some(ScenarioSpec::GtCsv { gt_csv }) = &mut cfg.scenario {
            *gt_csv = resolve(base, gt_csv);
        }
        cfg.estimator.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }

    pub fn sounder(&self) -> Result<SounderConfig, CliError> {
        let cfg = match &self.sounder {
            SounderSpec::Preset { preset, snr_db, noise_psd, tx_power_dbm } => {
                let mut c = SounderConfig::preset(preset).map_err(|e| CliError::Usage(e.to_string()))?;
                if let Some(p) = tx_power_dbm {
                    c.tx_power_dbm = *p;
                }
                if let Some(n) = noise_psd {
                    c = c.with_noise_psd(*n);
                }
                if let Some(s) = snr_db {
                    c = c.with_snr_db(*s);
                }
                c
            }
            SounderSpec::Full(c) => c.clone(),
        };
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }

    pub fn pattern(&self) -> Result<Arc<BeampatternGrid>, CliError> {
        let grid = match &self.pattern {
            PatternSpec::File { file } => {
                if !file.exists() {
                    return Err(CliError::Usage(format!("pattern file not found: {}", file.display())));
                }
                BeampatternGrid::load(file).map_err(|e| CliError::Data(format!("{}: {e}", file.display())))?
            }
            PatternSpec::Analytic { kind, exponent, xpol_floor_db } => {
                let (az, el, f) = BeampatternGrid::default_axes();
                BeampatternGrid::analytic(*kind, *exponent, *xpol_floor_db, az, el, f).map_err(|e| CliError::Usage(e.to_string()))?
            }
        };
        Ok(Arc::new(grid))
    }

    /// Ground truth named by the scenario, if any.
    pub fn ground_truth(&self, seed: u64, max_delay: f64) -> Result<Option<Vec<MpcParam>>, CliError> {
        match &self.scenario {
            None => Ok(None),
            Some(ScenarioSpec::Builtin { builtin }) => {
                let sc = scenarios::builtin(builtin, seed, max_delay).map_err(|e| CliError::Usage(e.to_string()))?;
                Ok(Some(sc.components()))
            }
            Some(ScenarioSpec::GtCsv { gt_csv }) => load_gt(gt_csv).map(Some),
        }
    }
}

pub fn load_gt(path: &Path) -> Result<Vec<MpcParam>, CliError> {
    if !path.exists() {
        return Err(CliError::Usage(format!("ground-truth file not found: {}", path.display())));
    }
    load_gt_csv(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}
