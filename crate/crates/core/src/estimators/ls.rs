//! Joint amplitude refresh: normal equations `(AᴴWA)α = AᴴWy` on the stacked system.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::beamspace::{Metric, ModelVector};
use crate::error::{Error, Result};

pub const MAX_CONDITION: f64 = 1e12;

/// `wdata` is the measurement already whitened by `metric`.
pub fn ls_amplitudes(mvs: &[ModelVector], wdata: &[Vec<Complex64>], metric: &Metric) -> Result<Vec<Complex64>> {
    let k = mvs.len();
    if k == 0 {
        return Ok(Vec::new());
    }
    let mut gram = DMatrix::<Complex64>::zeros(k, k);
    for i in 0..k {
        gram[(i, i)] = Complex64::new(mvs[i].norm2, 0.0);
        for j in i + 1..k {
            let v = mvs[i].inner(&mvs[j], metric);
            gram[(i, j)] = v;
            gram[(j, i)] = v.conj();
        }
    }
    let rhs = DVector::from_iterator(k, mvs.iter().map(|m| m.apply(wdata)));
    let sv = gram.clone().singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(cond <= MAX_CONDITION) {
        let (mut bi, mut bj, mut best) = (0, 0, -1.0);
        for i in 0..k {
            for j in i + 1..k {
                let c = gram[(i, j)].norm() / (gram[(i, i)].re * gram[(j, j)].re).sqrt();
                if c > best {
                    best = c;
                    bi = i;
                    bj = j;
                }
            }
        }
        return Err(Error::IllConditioned { cond, i: bi, j: bj });
    }
    let sol = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gram.lu().solve(&rhs).ok_or(Error::IllConditioned { cond, i: 0, j: 0 })?,
    };
    Ok(sol.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beampattern::BeampatternGrid;
    use crate::beamspace::{Mu, SounderModel};
    use crate::config::SounderConfig;
    use std::sync::Arc;

    fn setup() -> (SounderModel, Metric) {
        let cfg = SounderConfig::new(28e9, 1e9, 8e-9, 4, 3, 3.75e-3).unwrap();
        let m = SounderModel::new(&cfg, Arc::new(BeampatternGrid::cosine_power(1.0, -15.0).unwrap()));
        (m, Metric::identity(8))
    }

    fn synth(model: &SounderModel, mvs: &[ModelVector], amps: &[Complex64]) -> Vec<Vec<Complex64>> {
        let mut d = vec![vec![Complex64::new(0.0, 0.0); model.config.samples()]; model.n_rot()];
        for (m, a) in mvs.iter().zip(amps) {
            m.add_to(*a, &mut d);
        }
        d
    }

    #[test]
    fn single_column_is_matched_filter() {
        let (model, metric) = setup();
        let mv = model.model_vector(Mu::new(1.2, 1.5, 2e-9), &metric);
        let other = model.model_vector(Mu::new(2.0, 1.4, 5e-9), &metric);
        let y = synth(&model, &[mv.clone(), other], &[Complex64::new(0.3, 0.1), Complex64::new(1.0, -1.0)]);
        let a = ls_amplitudes(&[mv.clone()], &y, &metric).unwrap();
        let mf = mv.apply(&y) / mv.norm2;
        assert!((a[0] - mf).norm() < 1e-12);
    }

    #[test]
    fn exact_recovery_and_two_by_two_closed_form() {
        let (model, metric) = setup();
        let a = model.model_vector(Mu::new(1.2, 1.5, 2e-9), &metric);
        let b = model.model_vector(Mu::new(1.3, 1.55, 2.4e-9), &metric);
        let amps = [Complex64::new(0.3, 0.1), Complex64::new(-1.0, 0.5)];
        let y = synth(&model, &[a.clone(), b.clone()], &amps);
        let est = ls_amplitudes(&[a.clone(), b.clone()], &y, &metric).unwrap();
        for (e, t) in est.iter().zip(&amps) {
            assert!((e - t).norm() < 1e-9);
        }
        // Closed-form 2x2 inverse against a perturbed right-hand side.
        let mut y2 = y.clone();
        y2[0][3] += Complex64::new(0.7, -0.2);
        let (g11, g22, g12) = (a.norm2, b.norm2, a.inner(&b, &metric));
        let (r1, r2) = (a.apply(&y2), b.apply(&y2));
        let det = g11 * g22 - g12.norm_sqr();
        let x1 = (r1 * g22 - g12 * r2) / det;
        let x2 = (r2 * g11 - g12.conj() * r1) / det;
        let est = ls_amplitudes(&[a, b], &y2, &metric).unwrap();
        assert!((est[0] - x1).norm() < 1e-9 * x1.norm().max(1.0));
        assert!((est[1] - x2).norm() < 1e-9 * x2.norm().max(1.0));
    }

    #[test]
    fn duplicate_columns_are_ill_conditioned() {
        let (model, metric) = setup();
        let a = model.model_vector(Mu::new(1.2, 1.5, 2e-9), &metric);
        let y = synth(&model, &[a.clone()], &[Complex64::new(1.0, 0.0)]);
        match ls_amplitudes(&[a.clone(), model.model_vector(Mu::new(2.5, 1.0, 1e-9), &metric), a], &y, &metric) {
            Err(Error::IllConditioned { i, j, .. }) => assert_eq!((i, j), (0, 2)),
            other => panic!("expected conditioning error, got {other:?}"),
        }
    }
}
