//! Deterministic Fisher information of one path in (azimuth, elevation,
//! delay, |α|, arg α) and the resulting relative variance bound of |α|.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::beamspace::{Kron, Metric, Mu, SounderModel};

pub const N_PARAMS: usize = 5;
pub const AMP_INDEX: usize = 3;

type Terms = Vec<(Complex64, Kron)>;

/// Per rotation, the derivative of `α·h_i(μ)` with respect to each parameter.
fn jacobian(model: &SounderModel, mu: Mu, amp: Complex64) -> Vec<[Terms; N_PARAMS]> {
    let unit = if amp.norm() > 0.0 { amp / amp.norm() } else { Complex64::new(1.0, 0.0) };
    (0..model.n_rot())
        .map(|i| {
            let h = model.response(mu, i);
            let [da, de, dt] = model.response_derivatives(mu, i);
            let scale = |v: Vec<Kron>| v.into_iter().map(|k| (amp, k)).collect::<Terms>();
            [scale(da), scale(de), scale(dt), vec![(unit, h.clone())], vec![(Complex64::new(0.0, 1.0) * amp, h)]]
        })
        .collect()
}

fn inner(a: &Terms, b: &Terms, metric: &Metric) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (ca, ka) in a {
        for (cb, kb) in b {
            acc += ca.conj() * cb * ka.inner(kb, metric);
        }
    }
    acc
}

/// `F = (2/σ²) Re Σ_i D_iᴴ W D_i` with noise covariance `σ²·W⁻¹`.
pub fn fisher_information(model: &SounderModel, metric: &Metric, mu: Mu, amp: Complex64, noise_var: f64) -> DMatrix<f64> {
    let jac = jacobian(model, mu, amp);
    let mut f = DMatrix::<f64>::zeros(N_PARAMS, N_PARAMS);
    for d in &jac {
        for p in 0..N_PARAMS {
            for q in p..N_PARAMS {
                let v = inner(&d[p], &d[q], metric).re;
                f[(p, q)] += v;
                if q != p {
                    f[(q, p)] += v;
                }
            }
        }
    }
    f * (2.0 / noise_var)
}

/// Cramér–Rao bound on `var(|α̂|)/|α̂|²`; `+∞` for a singular information matrix.
pub fn fisher_relative_variance(model: &SounderModel, metric: &Metric, mu: Mu, amp: Complex64, noise_var: f64) -> f64 {
    if noise_var <= 0.0 {
        return 0.0;
    }
    let a2 = amp.norm_sqr();
    if a2 == 0.0 {
        return f64::INFINITY;
    }
    let f = fisher_information(model, metric, mu, amp, noise_var);
    // Parameters live on very different scales (radians vs seconds), so
    // conditioning is judged on the unit-diagonal form.
    let d: Vec<f64> = (0..N_PARAMS).map(|i| f[(i, i)].sqrt()).collect();
    if d.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
        return f64::INFINITY;
    }
    let scaled = DMatrix::from_fn(N_PARAMS, N_PARAMS, |i, j| f[(i, j)] / (d[i] * d[j]));
    let sv = scaled.clone().singular_values();
    if !(sv.min() > sv.max() * 1e-12) {
        return f64::INFINITY;
    }
    match scaled.try_inverse() {
        Some(inv) if inv[(AMP_INDEX, AMP_INDEX)] > 0.0 => inv[(AMP_INDEX, AMP_INDEX)] / (d[AMP_INDEX] * d[AMP_INDEX]) / a2,
        _ => f64::INFINITY,
    }
}
