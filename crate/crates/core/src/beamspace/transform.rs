//! Critically sampled beamspace transforms and marginal power profiles.
//!
//! With `U_N = (1/N)[a_N(0), a_N(1/N), …, a_N((N−1)/N)]`, the beam-frequency
//! representation of one frequency slice is `H_b = U_xᴴ H U_y` and the inverse
//! is `H = Nx·Ny·U_x H_b U_yᴴ`. The delay transform is an inverse DFT along
//! frequency normalized by `1/N`.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::config::SounderConfig;
use crate::error::Result;
use crate::synthesis::MeasurementSet;

use super::grid::{DelaySpec, Evaluator, GridValues};
use super::kernel::SounderModel;
use super::metric::Metric;

/// Applies `fft` along one axis of a `[k][y][x]` tensor; `stride`/`len` pick the axis.
fn along(data: &mut [Complex64], dims: (usize, usize, usize), axis: usize, fft: &Arc<dyn Fft<f64>>, scale: f64) {
    let (nx, ny, nf) = dims;
    let len = [nx, ny, nf][axis];
    let stride = [1, nx, nx * ny][axis];
    let mut line = vec![Complex64::new(0.0, 0.0); len];
    let outer: Vec<usize> = (0..nx * ny * nf).filter(|&i| (i / stride) % len == 0).collect();
    for base in outer {
        for (j, l) in line.iter_mut().enumerate() {
            *l = data[base + j * stride];
        }
        fft.process(&mut line);
        for (j, l) in line.iter().enumerate() {
            data[base + j * stride] = l * scale;
        }
    }
}

fn plans(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    let mut p = FftPlanner::new();
    (p.plan_fft_forward(n), p.plan_fft_inverse(n))
}

/// `H_b(f) = U_xᴴ H(f) U_y` for every frequency slice.
pub fn beam_frequency_transform(tensor: &[Complex64], nx: usize, ny: usize, nf: usize) -> Vec<Complex64> {
    let mut d = tensor.to_vec();
    let (_, ix) = plans(nx);
    let (fy, _) = plans(ny);
    along(&mut d, (nx, ny, nf), 0, &ix, 1.0 / nx as f64);
    along(&mut d, (nx, ny, nf), 1, &fy, 1.0 / ny as f64);
    d
}

/// `H(f) = Nx·Ny·U_x H_b(f) U_yᴴ`.
pub fn inverse_beam_frequency_transform(beams: &[Complex64], nx: usize, ny: usize, nf: usize) -> Vec<Complex64> {
    let mut d = beams.to_vec();
    let (fx, _) = plans(nx);
    let (_, iy) = plans(ny);
    along(&mut d, (nx, ny, nf), 0, &fx, 1.0);
    along(&mut d, (nx, ny, nf), 1, &iy, 1.0);
    d
}

/// Full angle-delay transform: beam-frequency followed by `(1/N)Σ_k H_b(f_k)e^{j2πkℓ/N}`.
pub fn beamspace_transform(tensor: &[Complex64], nx: usize, ny: usize, nf: usize) -> Vec<Complex64> {
    let mut d = beam_frequency_transform(tensor, nx, ny, nf);
    let (_, inv) = plans(nf);
    along(&mut d, (nx, ny, nf), 2, &inv, 1.0 / nf as f64);
    d
}

pub fn inverse_beamspace_transform(beams: &[Complex64], nx: usize, ny: usize, nf: usize) -> Vec<Complex64> {
    let mut d = beams.to_vec();
    let (fwd, _) = plans(nf);
    along(&mut d, (nx, ny, nf), 2, &fwd, 1.0);
    inverse_beam_frequency_transform(&d, nx, ny, nf)
}

/// Single-rotation objective over a product grid in global (az, el, τ).
pub fn beamspace_tensor(measurement: &MeasurementSet, model: &SounderModel, rotation: usize, az: &[f64], el: &[f64], delays: &DelaySpec) -> Result<GridValues> {
    let config: SounderConfig = measurement.config.clone().with_rotations(vec![measurement.config.rotations[rotation]])?;
    let single = SounderModel::new(&config, model.pattern.clone());
    let metric = Metric::identity(config.n_freq);
    let data = [measurement.tensors[rotation].clone()];
    Ok(Evaluator::new(&single, &metric, &data).evaluate(az, el, delays))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdpAxis {
    Az,
    El,
    Delay,
}

fn step(v: &[f64]) -> f64 {
    if v.len() > 1 {
        (v[1] - v[0]).abs()
    } else {
        1.0
    }
}

/// Marginal of the grid along one axis, weighted by the cell size of the
/// other two axes. Inactive azimuths contribute nothing.
pub fn pdp_1d(p: &GridValues, axis: PdpAxis) -> Vec<f64> {
    let (na, ne, nt) = p.dims();
    let (len, w) = match axis {
        PdpAxis::Az => (na, step(&p.el) * step(&p.delay)),
        PdpAxis::El => (ne, step(&p.az) * step(&p.delay)),
        PdpAxis::Delay => (nt, step(&p.az) * step(&p.el)),
    };
    let mut out = vec![0.0; len];
    for e in 0..ne {
        for a in 0..na {
            if !p.active[a] {
                continue;
            }
            for t in 0..nt {
                let i = match axis {
                    PdpAxis::Az => a,
                    PdpAxis::El => e,
                    PdpAxis::Delay => t,
                };
                out[i] += p.at(a, e, t) * w;
            }
        }
    }
    out
}
