//! Dense multipath (diffuse) covariance along frequency: a flat floor plus a
//! one-sided exponential delay-power profile, giving a Hermitian Toeplitz
//! covariance. Solves and determinants use the Levinson recursion; the
//! explicit inverse comes from the Gohberg–Semencul formula.

use std::f64::consts::TAU;

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::beamspace::Metric;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Powers are in units of the per-sample noise variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmcModel {
    /// Flat (white in delay) power added to the noise floor.
    pub base_power: f64,
    /// Diffuse power in the strongest delay bin.
    pub peak_power: f64,
    /// Exponential decay rate, 1/s.
    pub decay_rate: f64,
    /// Delay where the diffuse tail starts, s.
    pub onset_delay: f64,
}

impl DmcModel {
    pub fn zero() -> Self {
        DmcModel { base_power: 0.0, peak_power: 0.0, decay_rate: 1e9, onset_delay: 0.0 }
    }

    pub fn is_zero(&self) -> bool {
        self.base_power == 0.0 && self.peak_power == 0.0
    }

    pub fn validate(&self, duration_t: f64) -> Result<()> {
        let ok = self.base_power >= 0.0
            && self.peak_power >= 0.0
            && self.decay_rate > 0.0
            && self.decay_rate.is_finite()
            && (0.0..duration_t).contains(&self.onset_delay);
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid diffuse model {self:?}")))
        }
    }

    /// First column of `R_dan = I + R_τ` for `n` bins spaced `1/T`.
    pub fn column(&self, n: usize, duration_t: f64) -> Vec<Complex64> {
        (0..n)
            .map(|d| {
                let lag = d as f64 / duration_t;
                let mut v = Complex64::cis(-TAU * self.onset_delay * lag) * (self.peak_power / duration_t)
                    / Complex64::new(self.decay_rate, TAU * lag);
                if d == 0 {
                    v += 1.0 + self.base_power;
                }
                v
            })
            .collect()
    }

    pub fn covariance(&self, n_freq: usize, duration_t: f64) -> Result<ToeplitzCovariance> {
        self.validate(duration_t)?;
        ToeplitzCovariance::new(self.column(n_freq, duration_t)).map_err(|_| Error::NotPositiveDefinite(format!("{self:?}")))
    }

    /// Relative Frobenius change of the `n`-bin covariance versus `other`.
    /// Parameters that barely shape the covariance (say the onset of a
    /// vanishing tail) do not hold up convergence.
    pub fn relative_change(&self, other: &DmcModel, n: usize, duration_t: f64) -> f64 {
        let (a, b) = (self.column(n, duration_t), other.column(n, duration_t));
        let weight = |d: usize| if d == 0 { n as f64 } else { 2.0 * (n - d) as f64 };
        let num: f64 = a.iter().zip(&b).enumerate().map(|(d, (x, y))| weight(d) * (x - y).norm_sqr()).sum();
        let den: f64 = b.iter().enumerate().map(|(d, y)| weight(d) * y.norm_sqr()).sum();
        (num / den).sqrt()
    }
}

/// Hermitian positive-definite Toeplitz matrix given by its first column.
#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzCovariance {
    column: Vec<Complex64>,
    /// First column of the inverse.
    inv_col: Vec<Complex64>,
    logdet: f64,
}

fn entry(col: &[Complex64], i: usize, j: usize) -> Complex64 {
    if i >= j {
        col[i - j]
    } else {
        col[j - i].conj()
    }
}

/// Levinson recursion on `T x = rhs`. Returns `(x, first column of T⁻¹, ln|T|)`.
fn levinson(col: &[Complex64], rhs: &[Complex64]) -> Result<(Vec<Complex64>, Vec<Complex64>, f64)> {
    let n = col.len();
    let t0 = col[0].re;
    if !(t0 > 0.0) || !t0.is_finite() {
        return Err(Error::NotPositiveDefinite("non-positive diagonal".into()));
    }
    let mut f = vec![Complex64::new(1.0 / t0, 0.0)];
    let mut b = f.clone();
    let mut x = vec![rhs[0] / t0];
    let mut logdet = t0.ln();
    for m in 1..n {
        let ef: Complex64 = (0..m).map(|j| entry(col, m, j) * f[j]).sum();
        let eb: Complex64 = (0..m).map(|j| entry(col, 0, j + 1) * b[j]).sum();
        let den = Complex64::new(1.0, 0.0) - ef * eb;
        if !(den.re > 1e-14) || !den.re.is_finite() {
            return Err(Error::NotPositiveDefinite(format!("reflection step {m} lost definiteness")));
        }
        let mut nf = vec![ZERO; m + 1];
        let mut nb = vec![ZERO; m + 1];
        for j in 0..=m {
            let fj = if j < m { f[j] } else { ZERO };
            let bj = if j > 0 { b[j - 1] } else { ZERO };
            nf[j] = (fj - ef * bj) / den;
            nb[j] = (bj - eb * fj) / den;
        }
        f = nf;
        b = nb;
        if !(f[0].re > 0.0) {
            return Err(Error::NotPositiveDefinite(format!("step {m}")));
        }
        // |T_{m+1}| = |T_m| / (T_{m+1}⁻¹)_{00}
        logdet -= f[0].re.ln();
        let ex: Complex64 = (0..m).map(|j| entry(col, m, j) * x[j]).sum();
        let c = rhs[m] - ex;
        x.push(ZERO);
        for j in 0..=m {
            x[j] += c * b[j];
        }
    }
    Ok((x, f, logdet))
}

impl ToeplitzCovariance {
    pub fn new(column: Vec<Complex64>) -> Result<Self> {
        let n = column.len();
        let mut e0 = vec![ZERO; n];
        e0[0] = Complex64::new(1.0, 0.0);
        let (inv_col, _, logdet) = levinson(&column, &e0)?;
        Ok(ToeplitzCovariance { column, inv_col, logdet })
    }

    pub fn len(&self) -> usize {
        self.column.len()
    }

    pub fn is_empty(&self) -> bool {
        self.column.is_empty()
    }

    pub fn column(&self) -> &[Complex64] {
        &self.column
    }

    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    pub fn solve(&self, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
        Ok(levinson(&self.column, rhs)?.0)
    }

    /// Dense row-major inverse via `T⁻¹ = (1/x₀)(L(x)L(x)ᴴ − L(z)L(z)ᴴ)`.
    pub fn inverse(&self) -> Vec<Complex64> {
        let n = self.len();
        let x = &self.inv_col;
        let x0 = x[0].re;
        let z: Vec<Complex64> = (0..n).map(|i| if i == 0 { ZERO } else { x[n - i].conj() }).collect();
        let mut m = vec![ZERO; n * n];
        for i in 0..n {
            m[i * n] = x[i] * x[0].conj() - z[i] * z[0].conj();
            m[i] = x[0] * x[i].conj() - z[0] * z[i].conj();
        }
        for i in 1..n {
            for j in 1..n {
                m[i * n + j] = m[(i - 1) * n + (j - 1)] + x[i] * x[j].conj() - z[i] * z[j].conj();
            }
        }
        m.iter_mut().for_each(|v| *v /= x0);
        m
    }

    pub fn metric(&self) -> Metric {
        Metric::from_inverse(self.len(), self.inverse(), self.logdet)
    }
}

/// Draws `count` independent snapshots from `CN(0, R_dan − I)` scaled by
/// `noise_var` (the diffuse part only; add noise separately).
pub fn sample_dmc(model: &DmcModel, n_freq: usize, duration_t: f64, noise_var: f64, count: usize, seed: u64) -> Result<Vec<Vec<Complex64>>> {
    model.validate(duration_t)?;
    let mut col = model.column(n_freq, duration_t);
    col[0] -= 1.0;
    let dense = nalgebra::DMatrix::from_fn(n_freq, n_freq, |i, j| entry(&col, i, j) * noise_var);
    let reg = dense.clone() + nalgebra::DMatrix::identity(n_freq, n_freq) * Complex64::new(1e-12 * noise_var.max(1e-300), 0.0);
    let chol = nalgebra::Cholesky::new(reg).ok_or_else(|| Error::NotPositiveDefinite(format!("{model:?}")))?;
    let l = chol.l();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = std::f64::consts::FRAC_1_SQRT_2;
    Ok((0..count)
        .map(|_| {
            let w = nalgebra::DVector::from_fn(n_freq, |_, _| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re * sd, im * sd)
            });
            (&l * w).iter().copied().collect()
        })
        .collect())
}

/// Sample covariance of frequency snapshots taken from `(k·E + e)` tensors,
/// scaled by `1/noise_var`.
pub fn sample_covariance(tensors: &[Vec<Complex64>], elements: usize, n_freq: usize, noise_var: f64) -> Vec<Complex64> {
    let mut s = vec![ZERO; n_freq * n_freq];
    let mut count = 0usize;
    for t in tensors {
        for e in 0..elements {
            let v: Vec<Complex64> = (0..n_freq).map(|k| t[k * elements + e]).collect();
            for i in 0..n_freq {
                let vi = v[i];
                let row = &mut s[i * n_freq..(i + 1) * n_freq];
                for (o, vj) in row.iter_mut().zip(&v) {
                    *o += vi * vj.conj();
                }
            }
            count += 1;
        }
    }
    let scale = 1.0 / (count.max(1) as f64 * noise_var);
    s.iter_mut().for_each(|v| *v *= scale);
    s
}

/// Average negative log-likelihood per snapshot, `ln|R| + tr(R⁻¹S)`.
pub fn negative_log_likelihood(model: &DmcModel, scov: &[Complex64], n_freq: usize, duration_t: f64) -> f64 {
    match model.covariance(n_freq, duration_t) {
        Err(_) => f64::INFINITY,
        Ok(r) => {
            let inv = r.inverse();
            let tr: f64 = inv.iter().enumerate().map(|(idx, w)| {
                let (i, j) = (idx / n_freq, idx % n_freq);
                (w * scov[j * n_freq + i]).re
            }).sum();
            r.logdet() + tr
        }
    }
}

struct Likelihood<'a> {
    scov: &'a [Complex64],
    n: usize,
    t: f64,
}

impl Likelihood<'_> {
    fn decode(&self, u: &[f64]) -> DmcModel {
        let c = |v: f64| v.clamp(-40.0, 40.0);
        DmcModel {
            base_power: c(u[0]).exp(),
            peak_power: c(u[1]).exp(),
            decay_rate: c(u[2]).exp() / self.t,
            onset_delay: self.t / (1.0 + (-c(u[3])).exp()) * (1.0 - 1e-9),
        }
    }

    fn encode(&self, m: &DmcModel) -> Vec<f64> {
        let frac = (m.onset_delay / self.t).clamp(1e-6, 1.0 - 1e-6);
        vec![m.base_power.max(1e-12).ln(), m.peak_power.max(1e-12).ln(), (m.decay_rate * self.t).ln(), (frac / (1.0 - frac)).ln()]
    }
}

impl CostFunction for Likelihood<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, u: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        let v = negative_log_likelihood(&self.decode(u), self.scov, self.n, self.t);
        Ok(if v.is_finite() { v } else { 1e300 })
    }
}

/// Starting point from the mean delay-power profile of the snapshots.
pub fn initial_guess(scov: &[Complex64], n_freq: usize, duration_t: f64) -> DmcModel {
    let n = n_freq;
    // Delay-bin power of the unitary DFT: (1/N) Σ_{m,n} S[m,n] e^{j2π(m−n)ℓ/N}.
    let lags: Vec<Complex64> = (0..n)
        .map(|d| (0..n - d).map(|m| scov[(m + d) * n + m]).sum::<Complex64>())
        .collect();
    let pdp: Vec<f64> = (0..n)
        .map(|l| {
            let mut acc = lags[0].re;
            for (d, v) in lags.iter().enumerate().skip(1) {
                acc += 2.0 * (v * Complex64::cis(TAU * (d * l) as f64 / n as f64)).re;
            }
            acc / n as f64
        })
        .collect();
    let mut sorted = pdp.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let floor = sorted[n / 2];
    let (peak_bin, peak) = pdp.iter().enumerate().fold((0, f64::MIN), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
    let excess = (peak - floor).max(1e-3);
    let target = floor + excess / std::f64::consts::E;
    let mut width = 2usize;
    for s in 1..n {
        if pdp[(peak_bin + s) % n] < target {
            width = s.max(1);
            break;
        }
    }
    let bin = duration_t / n as f64;
    DmcModel {
        base_power: (floor - 1.0).max(1e-3),
        peak_power: excess,
        decay_rate: 1.0 / (width as f64 * bin),
        onset_delay: (peak_bin as f64 * bin).min(duration_t * (1.0 - 1e-6)),
    }
}

/// Maximum-likelihood diffuse model for the given normalized sample covariance.
pub fn fit_dmc(scov: &[Complex64], n_freq: usize, duration_t: f64, max_iters: u64) -> Result<DmcModel> {
    let problem = Likelihood { scov, n: n_freq, t: duration_t };
    let start = problem.encode(&initial_guess(scov, n_freq, duration_t));
    let steps = [1.0, 1.0, 0.7, 1.0];
    let mut simplex = vec![start.clone()];
    for (i, s) in steps.iter().enumerate() {
        let mut v = start.clone();
        v[i] += s;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(1e-10)
        .map_err(|e| Error::Domain(format!("optimizer setup: {e}")))?;
    let problem_ref = Likelihood { scov, n: n_freq, t: duration_t };
    let res = Executor::new(problem_ref, solver)
        .configure(|s| s.max_iters(max_iters))
        .run()
        .map_err(|e| Error::Domain(format!("diffuse fit failed: {e}")))?;
    let best = res.state.best_param.clone().unwrap_or(start);
    Ok(problem.decode(&best))
}
