//! Versioned builtin ground-truth scenarios.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::error::{Error, Result};
use crate::geometry::{rad, wrap_2pi};
use crate::mpc::{MpcParam, PolAmplitude};

pub const SCENARIO_VERSION: u32 = 1;
pub const BUILTIN_NAMES: [&str; 3] = ["single-mpc", "five-scatterers", "rich"];

/// Ids at or above this mark diffuse components (excluded from the specular ground truth).
pub const DIFFUSE_ID_BASE: i64 = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub specular: Vec<MpcParam>,
    pub diffuse: Vec<MpcParam>,
}

impl Scenario {
    /// Everything that goes into synthesis.
    pub fn components(&self) -> Vec<MpcParam> {
        self.specular.iter().chain(&self.diffuse).cloned().collect()
    }
}

fn co(id: i64, az_deg: f64, el_deg: f64, delay_ns: f64, a: Complex64) -> MpcParam {
    MpcParam { id, az_global: wrap_2pi(rad(az_deg)), el_global: rad(el_deg), delay: delay_ns * 1e-9, amp: PolAmplitude::co_polar(a) }
}

pub fn single_mpc() -> Scenario {
    Scenario { name: "single-mpc".into(), specular: vec![co(0, 60.0, 90.0, 15.0, Complex64::new(1.0, 0.0))], diffuse: Vec::new() }
}

/// Five unit co-polar reflections in the horizontal plane within one field
/// of view; 75°/78° and 110°/114° are closer than the angular resolution and
/// separated only in delay.
pub fn five_scatterers() -> Scenario {
    let rows = [(50.0, 20.3), (75.0, 26.6), (78.0, 31.2), (110.0, 34.7), (114.0, 22.4)];
    let specular = rows
        .iter()
        .enumerate()
        .map(|(k, &(az, tau))| co(k as i64, az, 90.0, tau, Complex64::from_polar(1.0, 0.4 + 1.1 * k as f64)))
        .collect();
    Scenario { name: "five-scatterers".into(), specular, diffuse: Vec::new() }
}

/// 30 specular paths with clustered diffuse satellites, drawn from `seed`.
/// Delays stay below `max_delay`.
pub fn rich(seed: u64, max_delay: f64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0000_0000_0001);
    let spread_az = Normal::new(0.0, rad(3.0)).expect("valid spread");
    let spread_el = Normal::new(0.0, rad(2.0)).expect("valid spread");
    let tail = Exp::new(1.0 / 2e-9).expect("valid rate");
    let hi = (0.7 * max_delay).max(6e-9);
    let mut specular = Vec::with_capacity(30);
    let mut diffuse = Vec::new();
    for k in 0..30 {
        let az = rng.random::<f64>() * TAU;
        let el = rad(60.0 + 60.0 * rng.random::<f64>());
        let delay = 5e-9 + (hi - 5e-9) * rng.random::<f64>();
        let mag = 10f64.powf(-rng.random::<f64>());
        let a = Complex64::from_polar(mag, rng.random::<f64>() * TAU);
        let x = Complex64::from_polar(0.1 * mag, rng.random::<f64>() * TAU);
        specular.push(MpcParam { id: k, az_global: az, el_global: el, delay, amp: PolAmplitude { vv: a, vh: x * 0.5, hv: x, hh: a * 0.8 } });
        let n_diffuse = 6 + rng.random_range(0..5);
        for j in 0..n_diffuse {
            let dmag = mag * 10f64.powf(-(15.0 + 10.0 * rng.random::<f64>()) / 20.0);
            let d = Complex64::from_polar(dmag, rng.random::<f64>() * TAU);
            let daz = wrap_2pi(az + spread_az.sample(&mut rng));
            let del = (el + spread_el.sample(&mut rng)).clamp(0.0, PI);
            let dtau = (delay + tail.sample(&mut rng)).min(max_delay * 0.999);
            diffuse.push(MpcParam { id: DIFFUSE_ID_BASE + 100 * k + j as i64, az_global: daz, el_global: del, delay: dtau, amp: PolAmplitude::co_polar(d) });
        }
    }
    Scenario { name: "rich".into(), specular, diffuse }
}

pub fn builtin(name: &str, seed: u64, max_delay: f64) -> Result<Scenario> {
    match name {
        "single-mpc" => Ok(single_mpc()),
        "five-scatterers" => Ok(five_scatterers()),
        "rich" => Ok(rich(seed, max_delay)),
        _ => Err(Error::Config(format!("unknown builtin scenario '{name}' (expected one of {})", BUILTIN_NAMES.join(", ")))),
    }
}
