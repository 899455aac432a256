use std::sync::Arc;

use num_complex::Complex64;

use crate::beampattern::BeampatternGrid;
use crate::beamspace::{Metric, Mu, SounderModel};
use crate::error::{Error, Result};
use crate::estimators::EstimatedMpc;
use crate::mpc::MpcParam;
use crate::synthesis::MeasurementSet;

/// Stacked per-rotation reconstruction `Σ α̂_k h(μ̂_k)`.
pub fn reconstruct(model: &SounderModel, mpcs: &[EstimatedMpc]) -> Vec<Vec<Complex64>> {
    let metric = Metric::identity(model.config.n_freq);
    let mut out = vec![vec![Complex64::new(0.0, 0.0); model.config.samples()]; model.n_rot()];
    for m in mpcs {
        model.model_vector(m.mu, &metric).add_to(m.amp, &mut out);
    }
    out
}

/// Residual power of the reconstruction over the measurement power.
pub fn nmse(measurement: &MeasurementSet, mpcs: &[EstimatedMpc], pattern: &Arc<BeampatternGrid>) -> Result<f64> {
    let energy = measurement.energy();
    if energy <= 0.0 {
        return Err(Error::ZeroMeasurement);
    }
    let model = SounderModel::new(&measurement.config, pattern.clone());
    let rec = reconstruct(&model, mpcs);
    let residual: f64 = measurement.tensors.iter().zip(&rec).map(|(t, r)| t.iter().zip(r).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>()).sum();
    Ok(residual / energy)
}

/// NMSE of the strongest `k` ground-truth paths under mutual orthogonality:
/// the share of VV power left in the weaker ones.
pub fn nmse_of_k(gt: &[MpcParam], k: usize) -> f64 {
    let mut p: Vec<f64> = gt.iter().map(|m| m.power_vv()).collect();
    p.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = p.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    p.iter().skip(k).sum::<f64>() / total
}

/// Ground-truth paths as estimates carrying their VV amplitude.
pub fn as_estimates(gt: &[MpcParam]) -> Vec<EstimatedMpc> {
    gt.iter().map(|m| EstimatedMpc::new(Mu::new(m.az_global, m.el_global, m.delay), m.amp.vv, 0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SounderConfig;
    use crate::mpc::PolAmplitude;
    use crate::synthesis::synthesize_multi_fov;

    fn gt(amps: &[f64]) -> Vec<MpcParam> {
        amps.iter()
            .enumerate()
            .map(|(i, a)| MpcParam::new(i as i64, 0.5 + i as f64, 1.4, (2 + 3 * i) as f64 * 1e-9, PolAmplitude::co_polar(Complex64::new(*a, 0.0))).unwrap())
            .collect()
    }

    #[test]
    fn nmse_of_k_arithmetic() {
        let g = gt(&[1.0, 2.0, 1.0]);
        assert_eq!(nmse_of_k(&g, 0), 1.0);
        assert_eq!(nmse_of_k(&g, 3), 0.0);
        assert!((nmse_of_k(&g, 1) - 2.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_empty_and_halved() {
        let cfg = SounderConfig::new(28e9, 1e9, 16e-9, 4, 4, 3.75e-3).unwrap().with_noise_psd(0.0);
        let pat = Arc::new(BeampatternGrid::isotropic());
        let g = gt(&[1.0]);
        let m = synthesize_multi_fov(&g, &cfg, &pat, 0).unwrap();
        let est = as_estimates(&g);
        assert!(nmse(&m, &est, &pat).unwrap() < 1e-28);
        assert_eq!(nmse(&m, &[], &pat).unwrap(), 1.0);
        let mut half = est.clone();
        half[0].amp *= 0.5;
        assert!((nmse(&m, &half, &pat).unwrap() - 0.25).abs() < 1e-12);
        let zero = MeasurementSet { tensors: m.tensors.iter().map(|t| vec![Complex64::new(0.0, 0.0); t.len()]).collect(), ..m };
        assert!(nmse(&zero, &est, &pat).is_err());
    }
}
