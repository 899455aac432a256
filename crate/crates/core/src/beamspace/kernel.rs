//! Model vectors `h(μ) = [g ⊙ a(θτ)] ⊗ [a*_Ny ⊗ a_Nx]` per rotation, kept in
//! factored Kronecker form so inner products cost `O(N + Nx + Ny)`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::beampattern::{BeampatternGrid, FreqSampler, Polarization};
use crate::config::SounderConfig;
use crate::geometry::{global_to_local_unchecked, wrap_2pi};
use crate::synthesis::steering_vector;

use super::metric::Metric;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Global path parameters: azimuth, polar elevation, delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mu {
    pub az: f64,
    pub el: f64,
    pub delay: f64,
}

impl Mu {
    pub fn new(az: f64, el: f64, delay: f64) -> Self {
        Mu { az, el, delay }
    }

    /// Folds into the search domain: azimuth mod 2π, elevation clamped to
    /// `[0, π]`, delay mod `period`.
    pub fn normalized(self, period: f64) -> Self {
        let mut d = self.delay.rem_euclid(period);
        if d >= period {
            d = 0.0;
        }
        Mu { az: wrap_2pi(self.az), el: self.el.clamp(0.0, PI), delay: d }
    }
}

/// One Kronecker term `s ⊗ conj(ay) ⊗ ax`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kron {
    pub s: Vec<Complex64>,
    pub ay: Vec<Complex64>,
    pub ax: Vec<Complex64>,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

impl Kron {
    /// `self† W other` where `W` acts on the frequency factor only.
    pub fn inner(&self, other: &Kron, metric: &Metric) -> Complex64 {
        let sy: Complex64 = self.ay.iter().zip(&other.ay).map(|(a, b)| a * b.conj()).sum();
        metric.quad(&self.s, &other.s) * sy * dot(&self.ax, &other.ax)
    }

    /// `self† y` for a tensor in `(k·Ny + y)·Nx + x` order.
    pub fn apply(&self, y: &[Complex64]) -> Complex64 {
        let (nx, ny) = (self.ax.len(), self.ay.len());
        let mut acc = ZERO;
        for (k, s) in self.s.iter().enumerate() {
            let slab = &y[k * nx * ny..(k + 1) * nx * ny];
            let mut sk = ZERO;
            for (iy, a) in self.ay.iter().enumerate() {
                sk += a * dot(&self.ax, &slab[iy * nx..(iy + 1) * nx]);
            }
            acc += s.conj() * sk;
        }
        acc
    }

    /// `out += c · self`.
    pub fn add_to(&self, c: Complex64, out: &mut [Complex64]) {
        let (nx, ny) = (self.ax.len(), self.ay.len());
        let plane: Vec<Complex64> = self.ay.iter().flat_map(|a| self.ax.iter().map(move |x| a.conj() * x)).collect();
        for (k, s) in self.s.iter().enumerate() {
            let cs = c * s;
            for (o, p) in out[k * nx * ny..(k + 1) * nx * ny].iter_mut().zip(&plane) {
                *o += cs * p;
            }
        }
    }

    pub fn dense(&self) -> Vec<Complex64> {
        let mut v = vec![ZERO; self.s.len() * self.ax.len() * self.ay.len()];
        self.add_to(Complex64::new(1.0, 0.0), &mut v);
        v
    }
}

/// Model vectors of one path, one entry per rotation.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelVector {
    pub mu: Mu,
    pub rot: Vec<Kron>,
    pub norms: Vec<f64>,
    pub norm2: f64,
}

impl ModelVector {
    /// Stacked `h† W y` over rotations (`y` already whitened if `W ≠ I`).
    pub fn apply(&self, data: &[Vec<Complex64>]) -> Complex64 {
        self.rot.iter().zip(data).map(|(h, y)| h.apply(y)).sum()
    }

    pub fn inner(&self, other: &ModelVector, metric: &Metric) -> Complex64 {
        self.rot.iter().zip(&other.rot).map(|(a, b)| a.inner(b, metric)).sum()
    }

    pub fn add_to(&self, c: Complex64, out: &mut [Vec<Complex64>]) {
        for (h, o) in self.rot.iter().zip(out.iter_mut()) {
            h.add_to(c, o);
        }
    }
}

/// Sounder geometry plus element pattern: everything needed to build `h(μ)`.
#[derive(Debug, Clone)]
pub struct SounderModel {
    pub config: SounderConfig,
    pub pattern: Arc<BeampatternGrid>,
    pub freqs: Vec<f64>,
    pub sampler: FreqSampler,
    pub ratio: f64,
    pub tx: f64,
}

impl SounderModel {
    pub fn new(config: &SounderConfig, pattern: Arc<BeampatternGrid>) -> Self {
        let freqs = config.frequencies();
        let sampler = pattern.sampler(&freqs);
        SounderModel { config: config.clone(), ratio: config.spacing_ratio(), tx: config.tx_amplitude(), freqs, sampler, pattern }
    }

    pub fn n_rot(&self) -> usize {
        self.config.rotations.len()
    }

    pub fn is_flat(&self) -> bool {
        self.sampler.is_flat()
    }

    /// TX-scaled co-polar gain over the frequency grid.
    pub fn gains(&self, az_local: f64, el_local: f64, out: &mut [Complex64]) {
        self.pattern.profile_into(az_local, el_local, Polarization::Co, &self.sampler, out);
        for g in out.iter_mut() {
            *g *= self.tx;
        }
    }

    pub fn delay_phasors(&self, delay: f64) -> Vec<Complex64> {
        self.freqs.iter().map(|f| Complex64::cis(-TAU * delay * f)).collect()
    }

    pub fn response(&self, mu: Mu, i: usize) -> Kron {
        let l = global_to_local_unchecked(wrap_2pi(mu.az), mu.el, self.config.rotations[i], self.ratio);
        let mut s = vec![ZERO; self.freqs.len()];
        self.gains(l.az_local, l.el_local, &mut s);
        for (v, p) in s.iter_mut().zip(self.delay_phasors(mu.delay)) {
            *v *= p;
        }
        Kron { s, ay: steering_vector(self.config.ny, l.theta_y), ax: steering_vector(self.config.nx, l.theta_x) }
    }

    pub fn model_vector(&self, mu: Mu, metric: &Metric) -> ModelVector {
        let rot: Vec<Kron> = (0..self.n_rot()).map(|i| self.response(mu, i)).collect();
        let e = self.config.elements() as f64;
        let norms: Vec<f64> = rot.iter().map(|h| e * metric.quad(&h.s, &h.s).re).collect();
        let norm2 = norms.iter().sum();
        ModelVector { mu, rot, norms, norm2 }
    }

    /// Partial derivatives of `h_i` with respect to global azimuth, elevation
    /// and delay, each as a sum of Kronecker terms. Pattern slopes use central
    /// differences of the interpolated grid.
    pub fn response_derivatives(&self, mu: Mu, i: usize) -> [Vec<Kron>; 3] {
        let rot = self.config.rotations[i];
        let l = global_to_local_unchecked(wrap_2pi(mu.az), mu.el, rot, self.ratio);
        let h = self.response(mu, i);
        let n = self.freqs.len();
        let rho = self.ratio;
        let ph = self.delay_phasors(mu.delay);
        let step = 1e-5;
        let gdiff = |da: f64, de: f64| {
            let mut p = vec![ZERO; n];
            let mut m = vec![ZERO; n];
            self.gains(l.az_local + da * step, l.el_local + de * step, &mut p);
            self.gains(l.az_local - da * step, l.el_local - de * step, &mut m);
            p.iter().zip(&m).zip(&ph).map(|((a, b), e)| (a - b) / (2.0 * step) * e).collect::<Vec<_>>()
        };
        let dsteer = |v: &[Complex64], scale: f64| -> Vec<Complex64> {
            v.iter().enumerate().map(|(m, a)| a * Complex64::new(0.0, -TAU * m as f64 * scale)).collect()
        };
        let (s_az, c_az) = l.az_local.sin_cos();
        let (s_el, c_el) = l.el_local.sin_cos();
        let dthx_daz = rho * c_az * c_el;
        let dthx_del = rho * s_az * s_el;
        let dthy_del = -rho * c_el;

        let d_az = vec![
            Kron { s: gdiff(1.0, 0.0), ay: h.ay.clone(), ax: h.ax.clone() },
            Kron { s: h.s.clone(), ay: h.ay.clone(), ax: dsteer(&h.ax, dthx_daz) },
        ];
        let d_el = vec![
            Kron { s: gdiff(0.0, -1.0), ay: h.ay.clone(), ax: h.ax.clone() },
            Kron { s: h.s.clone(), ay: h.ay.clone(), ax: dsteer(&h.ax, dthx_del) },
            Kron { s: h.s.clone(), ay: dsteer(&h.ay, dthy_del), ax: h.ax.clone() },
        ];
        let ds: Vec<Complex64> = h.s.iter().zip(&self.freqs).map(|(s, f)| s * Complex64::new(0.0, -TAU * f)).collect();
        let d_tau = vec![Kron { s: ds, ay: h.ay.clone(), ax: h.ax.clone() }];
        [d_az, d_el, d_tau]
    }

    /// Local azimuth/elevation and spatial frequencies for rotation `i`.
    pub fn local(&self, az: f64, el: f64, i: usize) -> crate::geometry::LocalAngles {
        global_to_local_unchecked(wrap_2pi(az), el, self.config.rotations[i], self.ratio)
    }

    /// Whether any rotation sees `az` inside its half-plane field of view.
    pub fn in_any_fov(&self, az: f64) -> bool {
        self.config.rotations.iter().any(|&r| crate::geometry::fov_contains(r, wrap_2pi(az)))
    }

    pub fn horizon() -> f64 {
        FRAC_PI_2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rad;
    use crate::mpc::{MpcParam, PolAmplitude};
    use crate::synthesis::synthesize;

    fn cfg() -> SounderConfig {
        SounderConfig::new(28e9, 1e9, 6e-9, 3, 4, 3.75e-3).unwrap()
    }

    #[test]
    fn matches_synthesized_tensor() {
        let c = cfg();
        let pat = Arc::new(BeampatternGrid::cosine_power(1.5, -15.0).unwrap());
        let model = SounderModel::new(&c, pat.clone());
        let mu = Mu::new(rad(71.0), rad(83.0), 2.2e-9);
        let mpc = MpcParam::new(0, mu.az, mu.el, mu.delay, PolAmplitude::co_polar(Complex64::new(1.0, 0.0))).unwrap();
        for (i, &r) in c.rotations.iter().enumerate() {
            let t = synthesize(&[mpc.clone()], &c, &pat, r).unwrap();
            let h = model.response(mu, i).dense();
            for (a, b) in t.iter().zip(&h) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn broadside_norms() {
        let c = cfg();
        let model = SounderModel::new(&c, Arc::new(BeampatternGrid::isotropic()));
        let mv = model.model_vector(Mu::new(rad(90.0), rad(90.0), 0.0), &Metric::identity(c.n_freq));
        assert!(mv.rot[0].dense().iter().all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-12));
        assert!((mv.norms[0] - c.samples() as f64).abs() < 1e-9);
        assert!((mv.norm2 - mv.norms.iter().sum::<f64>()).abs() < 1e-9);
    }

    #[test]
    fn kron_inner_matches_dense() {
        let c = cfg();
        let model = SounderModel::new(&c, Arc::new(BeampatternGrid::cosine_power(1.0, -10.0).unwrap()));
        let a = model.response(Mu::new(0.4, 1.3, 1e-9), 1);
        let b = model.response(Mu::new(0.9, 1.7, 4e-9), 1);
        let (da, db) = (a.dense(), b.dense());
        let direct: Complex64 = da.iter().zip(&db).map(|(x, y)| x.conj() * y).sum();
        assert!((a.inner(&b, &Metric::identity(c.n_freq)) - direct).norm() < 1e-10);
        assert!((a.apply(&db) - direct).norm() < 1e-10);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let c = cfg();
        let model = SounderModel::new(&c, Arc::new(BeampatternGrid::cosine_power(1.0, -10.0).unwrap()));
        let mu = Mu::new(rad(100.3), rad(80.7), 2.3e-9);
        let steps = [1e-6, 1e-6, 1e-15];
        for i in 0..3 {
            let d = model.response_derivatives(mu, i);
            for (p, terms) in d.iter().enumerate() {
                let mut an = vec![ZERO; c.samples()];
                for t in terms {
                    t.add_to(Complex64::new(1.0, 0.0), &mut an);
                }
                let mut hi = mu;
                let mut lo = mu;
                match p {
                    0 => {
                        hi.az += steps[0];
                        lo.az -= steps[0];
                    }
                    1 => {
                        hi.el += steps[1];
                        lo.el -= steps[1];
                    }
                    _ => {
                        hi.delay += steps[2];
                        lo.delay -= steps[2];
                    }
                }
                let (vh, vl) = (model.response(hi, i).dense(), model.response(lo, i).dense());
                let scale = an.iter().map(|v| v.norm()).fold(0.0, f64::max);
                for (k, a) in an.iter().enumerate() {
                    let fd = (vh[k] - vl[k]) / (2.0 * steps[p]);
                    assert!((fd - a).norm() < 1e-4 * scale, "rot {i} param {p}");
                }
            }
        }
    }
}
