use serde::{Deserialize, Serialize};

use crate::mpc::MpcParam;

/// Normalizers of the association cost: delay in seconds, angle in radians,
/// path gain in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sigmas {
    pub delay: f64,
    pub angle: f64,
    pub gain_db: f64,
}

impl Sigmas {
    /// 1 ns, 1°, 1 dB.
    pub fn unit() -> Self {
        Sigmas { delay: 1e-9, angle: 1f64.to_radians(), gain_db: 1.0 }
    }

    pub fn is_valid(&self) -> bool {
        [self.delay, self.angle, self.gain_db].iter().all(|s| s.is_finite() && *s > 0.0)
    }
}

impl Default for Sigmas {
    fn default() -> Self {
        Sigmas::unit()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairCost {
    pub total: f64,
    pub angle: f64,
    pub delay: f64,
    pub gain: f64,
}

/// Point on the unit sphere for a global azimuth and polar elevation.
pub fn unit_direction(az: f64, el: f64) -> [f64; 3] {
    [az.cos() * el.sin(), az.sin() * el.sin(), el.cos()]
}

/// Great-circle distance between two directions, in `[0, π]`.
pub fn geodesic(a: &MpcParam, b: &MpcParam) -> f64 {
    let (u, v) = (unit_direction(a.az_global, a.el_global), unit_direction(b.az_global, b.el_global));
    let dot: f64 = u.iter().zip(&v).map(|(x, y)| x * y).sum();
    dot.clamp(-1.0, 1.0).acos()
}

/// `20·log10(|α_gt| / |α_est|)` on the VV amplitudes; infinite when either is zero.
pub fn gain_ratio_db(gt: &MpcParam, est: &MpcParam) -> f64 {
    let (a, b) = (gt.amp.vv.norm(), est.amp.vv.norm());
    if a == 0.0 || b == 0.0 {
        return f64::INFINITY;
    }
    20.0 * (a / b).log10()
}

pub fn pairwise_cost(gt: &MpcParam, est: &MpcParam, sigmas: &Sigmas) -> PairCost {
    let angle = (geodesic(gt, est) / sigmas.angle).powi(2);
    let delay = ((gt.delay - est.delay) / sigmas.delay).powi(2);
    let gain = (gain_ratio_db(gt, est) / sigmas.gain_db).powi(2);
    PairCost { total: angle + delay + gain, angle, delay, gain }
}
