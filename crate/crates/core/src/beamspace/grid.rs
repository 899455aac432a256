//! Separable evaluation of the stacked matched-filter objective
//! `|h†(μ) W y|² / h†(μ) W h(μ)` on product grids of (azimuth, elevation, delay).
//!
//! Per elevation row the data are beamformed along y, then along x for each
//! azimuth and rotation, weighted by the conjugate element gain, summed over
//! rotations and finally correlated in delay (an FFT on uniform delay grids).

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::beampattern::Axis;
use crate::config::SounderConfig;

use super::kernel::{Mu, SounderModel};
use super::metric::Metric;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Global search grid plus the resolution bins used for refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchGrid {
    pub az: Axis,
    pub el: Axis,
    pub delay: Axis,
    pub coarse_os: usize,
    pub fine_os: usize,
    pub bin_az: f64,
    pub bin_el: f64,
    pub bin_delay: f64,
}

impl SearchGrid {
    pub fn new(config: &SounderConfig, coarse_os: usize, fine_os: usize) -> Self {
        let coarse_os = coarse_os.max(1);
        let bin_az = config.az_resolution();
        let bin_el = config.el_resolution();
        let bin_delay = config.delay_resolution();
        let n_az = (TAU / (bin_az / coarse_os as f64)).ceil() as usize;
        let n_el = (PI / (bin_el / coarse_os as f64)).ceil() as usize + 1;
        let n_tau = config.n_freq * coarse_os;
        SearchGrid {
            az: Axis::new(0.0, TAU / n_az as f64, n_az),
            el: Axis::new(0.0, PI / (n_el - 1) as f64, n_el),
            delay: Axis::new(0.0, config.duration_t / n_tau as f64, n_tau),
            coarse_os,
            fine_os: fine_os.max(1),
            bin_az,
            bin_el,
            bin_delay,
        }
    }

    pub fn az_values(&self) -> Vec<f64> {
        (0..self.az.count).map(|i| self.az.value(i)).collect()
    }

    pub fn el_values(&self) -> Vec<f64> {
        (0..self.el.count).map(|i| self.el.value(i)).collect()
    }

    pub fn delay_spec(&self) -> DelaySpec {
        DelaySpec::Uniform(self.delay.count)
    }

    pub fn fine_steps(&self) -> [f64; 3] {
        let f = self.fine_os as f64;
        [self.bin_az / f, self.bin_el / f, self.bin_delay / f]
    }

    pub fn bins(&self) -> [f64; 3] {
        [self.bin_az, self.bin_el, self.bin_delay]
    }

    pub fn mu_at(&self, a: usize, e: usize, t: usize) -> Mu {
        Mu::new(self.az.value(a), self.el.value(e), self.delay.value(t))
    }

    /// Nearest point of the fine lattice: a coarse grid point plus a whole
    /// number of fine steps.
    pub fn snap(&self, mu: Mu) -> Mu {
        let fine = self.fine_steps();
        let az_period = self.az.step * self.az.count as f64;
        let delay_period = self.delay.step * self.delay.count as f64;
        let snap_axis = |axis: &Axis, x: f64, step: f64, period: Option<f64>| {
            let i = ((x - axis.start) / axis.step).round();
            let i = match period {
                Some(_) => i.rem_euclid(axis.count as f64),
                None => i.clamp(0.0, axis.count.saturating_sub(1) as f64),
            };
            let base = axis.value(i as usize);
            let mut off = x - base;
            if let Some(p) = period {
                off -= (off / p).round() * p;
            }
            base + (off / step).round() * step
        };
        Mu::new(
            snap_axis(&self.az, mu.az, fine[0], Some(az_period)).rem_euclid(az_period),
            snap_axis(&self.el, mu.el, fine[1], None).clamp(0.0, PI),
            snap_axis(&self.delay, mu.delay, fine[2], Some(delay_period)).rem_euclid(delay_period),
        )
    }
}

/// Delay samples: `Uniform(L)` is `τ_m = m·T/L` for `m < L` (requires `L ≥ N`).
#[derive(Debug, Clone, PartialEq)]
pub enum DelaySpec {
    Uniform(usize),
    List(Vec<f64>),
}

/// Objective values laid out as `(e·n_az + a)·n_tau + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridValues {
    pub az: Vec<f64>,
    pub el: Vec<f64>,
    pub delay: Vec<f64>,
    pub values: Vec<f64>,
    pub active: Vec<bool>,
}

impl GridValues {
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.az.len(), self.el.len(), self.delay.len())
    }

    pub fn index(&self, a: usize, e: usize, t: usize) -> usize {
        (e * self.az.len() + a) * self.delay.len() + t
    }

    pub fn at(&self, a: usize, e: usize, t: usize) -> f64 {
        self.values[self.index(a, e, t)]
    }

    pub fn mu(&self, a: usize, e: usize, t: usize) -> Mu {
        Mu::new(self.az[a], self.el[e], self.delay[t])
    }

    /// Largest value over active cells; ties resolve to the lowest (e, a, t).
    pub fn argmax(&self) -> Option<(usize, usize, usize, f64)> {
        let (na, ne, nt) = self.dims();
        let mut best: Option<(usize, usize, usize, f64)> = None;
        for e in 0..ne {
            for a in 0..na {
                if !self.active[a] {
                    continue;
                }
                for t in 0..nt {
                    let v = self.at(a, e, t);
                    if best.is_none_or(|b| v > b.3) {
                        best = Some((a, e, t, v));
                    }
                }
            }
        }
        best
    }

    pub fn active_values(&self) -> Vec<f64> {
        let (na, ne, nt) = self.dims();
        let mut out = Vec::with_capacity(na * ne * nt);
        for e in 0..ne {
            for a in 0..na {
                if self.active[a] {
                    out.extend_from_slice(&self.values[self.index(a, e, 0)..self.index(a, e, 0) + nt]);
                }
            }
        }
        out
    }

    pub fn median(&self) -> f64 {
        let mut v = self.active_values();
        if v.is_empty() {
            return 0.0;
        }
        let mid = v.len() / 2;
        let (_, m, _) = v.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
        *m
    }
}

/// Row-major complex product `(m × k) · (k × n)` on split real/imaginary parts.
fn complex_gemm(m: usize, k: usize, n: usize, a: (&[f64], &[f64]), b: (&[f64], &[f64])) -> (Vec<f64>, Vec<f64>) {
    assert!(a.0.len() == m * k && a.1.len() == m * k && b.0.len() == k * n && b.1.len() == k * n);
    let mut cr = vec![0.0; m * n];
    let mut ci = vec![0.0; m * n];
    let (k_, n_) = (k as isize, n as isize);
    let acc = |alpha: f64, x: &[f64], y: &[f64], c: &mut [f64]| {
        // SAFETY: the shapes and unit column strides match the slice lengths asserted above.
        unsafe { matrixmultiply::dgemm(m, k, n, alpha, x.as_ptr(), k_, 1, y.as_ptr(), n_, 1, 1.0, c.as_mut_ptr(), n_, 1) }
    };
    acc(1.0, a.0, b.0, &mut cr);
    acc(-1.0, a.1, b.1, &mut cr);
    acc(1.0, a.0, b.1, &mut ci);
    acc(1.0, a.1, b.0, &mut ci);
    (cr, ci)
}

#[derive(Clone)]
enum DelayPlan {
    Uniform { fft: Arc<dyn Fft<f64>>, len: usize },
    List { phasors: Vec<Vec<Complex64>> },
}

/// Holds the (optionally whitened) data in a beamforming-friendly layout.
pub struct Evaluator<'a> {
    model: &'a SounderModel,
    metric: &'a Metric,
    /// Per rotation, split real/imag in `(y·Nx + x)·N + k` order.
    data: Vec<(Vec<f64>, Vec<f64>)>,
}

impl<'a> Evaluator<'a> {
    /// `data` must already be whitened by `metric` (see [`Metric::whiten`]).
    pub fn new(model: &'a SounderModel, metric: &'a Metric, data: &[Vec<Complex64>]) -> Self {
        let (nx, ny, nf) = (model.config.nx, model.config.ny, model.config.n_freq);
        let data = data
            .iter()
            .map(|t| {
                let mut re = vec![0.0; t.len()];
                let mut im = vec![0.0; t.len()];
                for k in 0..nf {
                    for y in 0..ny {
                        for x in 0..nx {
                            let v = t[(k * ny + y) * nx + x];
                            let j = (y * nx + x) * nf + k;
                            re[j] = v.re;
                            im[j] = v.im;
                        }
                    }
                }
                (re, im)
            })
            .collect();
        Evaluator { model, metric, data }
    }

    pub fn model(&self) -> &SounderModel {
        self.model
    }

    pub fn metric(&self) -> &Metric {
        self.metric
    }

    pub fn evaluate(&self, az: &[f64], el: &[f64], delays: &DelaySpec) -> GridValues {
        let model = self.model;
        let nf = model.config.n_freq;
        let (delay, plan) = match delays {
            DelaySpec::Uniform(len) => {
                assert!(*len >= nf, "uniform delay grid must have at least N samples");
                let fft = FftPlanner::new().plan_fft_inverse(*len);
                let step = model.config.duration_t / *len as f64;
                ((0..*len).map(|m| m as f64 * step).collect::<Vec<_>>(), DelayPlan::Uniform { fft, len: *len })
            }
            DelaySpec::List(list) => {
                let phasors = list.iter().map(|&t| model.freqs.iter().map(|f| Complex64::cis(TAU * t * f)).collect()).collect();
                (list.clone(), DelayPlan::List { phasors })
            }
        };
        let df = model.config.delta_f();
        // Whitened denominators need e(τ)† W e(τ) (flat gain) or the lag phasors.
        let quad_tab: Vec<f64> = if self.metric.is_identity() {
            Vec::new()
        } else {
            delay.iter().map(|&t| self.metric.phasor_quad(t, df)).collect()
        };
        let lag_tab: Vec<Vec<Complex64>> = if self.metric.is_identity() || model.is_flat() {
            Vec::new()
        } else {
            delay
                .iter()
                .map(|&t| (0..2 * nf - 1).map(|i| Complex64::cis(-TAU * t * (i as f64 - (nf as f64 - 1.0)) * df)).collect())
                .collect()
        };
        let active: Vec<bool> = az.iter().map(|&a| model.in_any_fov(a)).collect();
        let beams = self.y_beams(el);
        let row = az.len() * delay.len();
        let mut values = vec![0.0; row * el.len()];
        values.par_chunks_mut(row.max(1)).zip(el.par_iter()).enumerate().for_each(|(e, (out, &el_g))| {
            self.eval_row(el_g, e, &beams, az, &active, &plan, &delay, &quad_tab, &lag_tab, out);
        });
        GridValues { az: az.to_vec(), el: el.to_vec(), delay, values, active }
    }

    /// Beamforms every rotation along y for all elevations at once: per
    /// rotation, row-major real and imaginary `n_el × (Nx·N)` arrays whose
    /// row `e` holds `Σ_y a_y[y] Y[k, y, x]` in `x·N + k` order.
    fn y_beams(&self, el: &[f64]) -> Vec<(Vec<f64>, Vec<f64>)> {
        let cfg = &self.model.config;
        let (nx, ny, nf) = (cfg.nx, cfg.ny, cfg.n_freq);
        let mut wr = vec![0.0; el.len() * ny];
        let mut wi = vec![0.0; el.len() * ny];
        for (e, &el_g) in el.iter().enumerate() {
            let theta_y = self.model.ratio * (FRAC_PI_2 - el_g).sin();
            let (step, mut w) = (Complex64::cis(-TAU * theta_y), Complex64::new(1.0, 0.0));
            for y in 0..ny {
                wr[e * ny + y] = w.re;
                wi[e * ny + y] = w.im;
                w *= step;
            }
        }
        self.data.par_iter().map(|(yr, yi)| complex_gemm(el.len(), ny, nx * nf, (&wr, &wi), (yr, yi))).collect()
    }

    #[allow(clippy::too_many_arguments)]
    fn eval_row(
        &self,
        el_g: f64,
        row: usize,
        y_beams: &[(Vec<f64>, Vec<f64>)],
        az: &[f64],
        active: &[bool],
        plan: &DelayPlan,
        delay: &[f64],
        quad_tab: &[f64],
        lag_tab: &[Vec<Complex64>],
        out: &mut [f64],
    ) {
        let model = self.model;
        let cfg = &model.config;
        let (nx, ny, nf) = (cfg.nx, cfg.ny, cfg.n_freq);
        let n_tau = delay.len();
        let elements = (nx * ny) as f64;

        // Beamform along x for every active azimuth: per rotation a row-major
        // `n_active × N` pair whose row `j` is `Σ_x a_x[x] B[x, k]`.
        let cols: Vec<usize> = (0..az.len()).filter(|&a| active[a]).collect();
        let locals: Vec<Vec<_>> = (0..y_beams.len()).map(|i| cols.iter().map(|&a| model.local(az[a], el_g, i)).collect()).collect();
        let span = row * nx * nf..(row + 1) * nx * nf;
        let beams: Vec<(Vec<f64>, Vec<f64>)> = y_beams
            .iter()
            .zip(&locals)
            .map(|((yr, yi), loc)| {
                let mut wr = vec![0.0; cols.len() * nx];
                let mut wi = vec![0.0; cols.len() * nx];
                for (j, l) in loc.iter().enumerate() {
                    let (step, mut w) = (Complex64::cis(TAU * l.theta_x), Complex64::new(1.0, 0.0));
                    for x in 0..nx {
                        wr[j * nx + x] = w.re;
                        wi[j * nx + x] = w.im;
                        w *= step;
                    }
                }
                complex_gemm(cols.len(), nx, nf, (&wr, &wi), (&yr[span.clone()], &yi[span.clone()]))
            })
            .collect();

        let mut g = vec![ZERO; nf];
        let mut dr = vec![0.0; nf];
        let mut di = vec![0.0; nf];
        let mut lag_acc = vec![ZERO; if lag_tab.is_empty() { 0 } else { 2 * nf - 1 }];
        let mut buf = match plan {
            DelayPlan::Uniform { len, .. } => vec![ZERO; *len],
            DelayPlan::List { .. } => Vec::new(),
        };
        let mut scratch = match plan {
            DelayPlan::Uniform { fft, .. } => vec![ZERO; fft.get_inplace_scratch_len()],
            DelayPlan::List { .. } => Vec::new(),
        };
        let winv = self.metric.inverse();

        out.iter_mut().for_each(|v| *v = 0.0);
        for (j, &a) in cols.iter().enumerate() {
            let dst = &mut out[a * n_tau..(a + 1) * n_tau];
            dr.iter_mut().for_each(|v| *v = 0.0);
            di.iter_mut().for_each(|v| *v = 0.0);
            lag_acc.iter_mut().for_each(|v| *v = ZERO);
            let mut gain_energy = 0.0;
            for ((c_r, c_i), loc) in beams.iter().zip(&locals) {
                let l = &loc[j];
                let (cr, ci) = (&c_r[j * nf..(j + 1) * nf], &c_i[j * nf..(j + 1) * nf]);
                if model.is_flat() {
                    model.gains(l.az_local, l.el_local, &mut g[..1]);
                    let (gr, gi) = (g[0].re, -g[0].im);
                    for k in 0..nf {
                        dr[k] += gr * cr[k] - gi * ci[k];
                        di[k] += gr * ci[k] + gi * cr[k];
                    }
                    gain_energy += g[0].norm_sqr();
                } else {
                    model.gains(l.az_local, l.el_local, &mut g);
                    for k in 0..nf {
                        let (gr, gi) = (g[k].re, -g[k].im);
                        dr[k] += gr * cr[k] - gi * ci[k];
                        di[k] += gr * ci[k] + gi * cr[k];
                    }
                    match winv {
                        None => gain_energy += g.iter().map(|v| v.norm_sqr()).sum::<f64>(),
                        Some(w) => {
                            for m in 0..nf {
                                for c in 0..nf {
                                    lag_acc[c + nf - 1 - m] += g[m].conj() * w[m * nf + c] * g[c];
                                }
                            }
                        }
                    }
                }
            }

            match plan {
                DelayPlan::Uniform { fft, .. } => {
                    buf.iter_mut().for_each(|v| *v = ZERO);
                    for k in 0..nf {
                        buf[k] = Complex64::new(dr[k], di[k]);
                    }
                    fft.process_with_scratch(&mut buf, &mut scratch);
                    for (o, v) in dst.iter_mut().zip(&buf) {
                        *o = v.norm_sqr();
                    }
                }
                DelayPlan::List { phasors } => {
                    for (o, p) in dst.iter_mut().zip(phasors) {
                        let mut xr = 0.0;
                        let mut xi = 0.0;
                        for k in 0..nf {
                            xr += dr[k] * p[k].re - di[k] * p[k].im;
                            xi += dr[k] * p[k].im + di[k] * p[k].re;
                        }
                        *o = xr * xr + xi * xi;
                    }
                }
            }

            for (t, o) in dst.iter_mut().enumerate() {
                let den = if self.metric.is_identity() {
                    let per = if model.is_flat() { gain_energy * nf as f64 } else { gain_energy };
                    elements * per
                } else if model.is_flat() {
                    elements * gain_energy * quad_tab[t]
                } else {
                    elements * lag_acc.iter().zip(&lag_tab[t]).map(|(c, p)| (c * p).re).sum::<f64>()
                };
                *o = if den > 0.0 { *o / den } else { 0.0 };
            }
        }
    }

    /// `h† W y` for the stored (already whitened) data.
    pub fn project(&self, mv: &super::kernel::ModelVector) -> Complex64 {
        let nf = self.model.config.n_freq;
        let nx = self.model.config.nx;
        let mut acc = ZERO;
        for (h, (re, im)) in mv.rot.iter().zip(&self.data) {
            for (y, ay) in h.ay.iter().enumerate() {
                for (x, ax) in h.ax.iter().enumerate() {
                    let j = (y * nx + x) * nf;
                    let mut sk = ZERO;
                    for (k, s) in h.s.iter().enumerate() {
                        sk += s.conj() * Complex64::new(re[j + k], im[j + k]);
                    }
                    acc += ay * ax.conj() * sk;
                }
            }
        }
        acc
    }

    /// Objective at a single point through the beamforming route.
    pub fn objective(&self, mu: Mu) -> f64 {
        self.evaluate(&[mu.az], &[mu.el], &DelaySpec::List(vec![mu.delay])).values[0]
    }
}
