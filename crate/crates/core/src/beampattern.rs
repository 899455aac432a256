//! Gridded complex element beampatterns (co- and cross-polar) with
//! bilinear angular and linear frequency interpolation.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::SounderConfig;
use crate::error::{Error, Result};

static CLAMP_WARNED: AtomicBool = AtomicBool::new(false);
const NODE_SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(start: f64, step: f64, count: usize) -> Self {
        Axis { start, step, count }
    }

    pub fn value(&self, i: usize) -> f64 {
        self.start + self.step * i as f64
    }

    pub fn last(&self) -> f64 {
        self.value(self.count.saturating_sub(1))
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.count == 0 {
            return Err(Error::Validation(format!("{name} axis is empty")));
        }
        if !self.start.is_finite() || !self.step.is_finite() {
            return Err(Error::Validation(format!("{name} axis is not finite")));
        }
        if self.count > 1 && self.step <= 0.0 {
            return Err(Error::Validation(format!("{name} axis must be strictly increasing")));
        }
        Ok(())
    }

    fn is_periodic(&self) -> bool {
        self.count > 1 && (self.step * self.count as f64 - TAU).abs() < 1e-6
    }

    /// Bracketing nodes and the weight of the upper node. The boolean is
    /// true when the query had to be clamped.
    fn locate(&self, x: f64, periodic: bool) -> (usize, usize, f64, bool) {
        if self.count == 1 {
            return (0, 0, 0.0, false);
        }
        let mut u = (x - self.start) / self.step;
        let n = self.count as f64;
        if periodic {
            u = u.rem_euclid(n);
        }
        let r = u.round();
        if (u - r).abs() < NODE_SNAP {
            u = r;
        }
        if periodic {
            if u >= n {
                u -= n;
            }
            let i0 = u.floor() as usize;
            let i0 = i0.min(self.count - 1);
            return (i0, (i0 + 1) % self.count, u - i0 as f64, false);
        }
        let clamped = u < 0.0 || u > n - 1.0;
        let u = u.clamp(0.0, n - 1.0);
        let i0 = (u.floor() as usize).min(self.count - 2);
        (i0, i0 + 1, u - i0 as f64, clamped)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarization {
    Co,
    Xpol,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    Isotropic,
    CosinePower,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeampatternGrid {
    pub az_axis: Axis,
    pub el_axis: Axis,
    pub freq_axis: Axis,
    pub g_co: Vec<Complex64>,
    pub g_xpol: Vec<Complex64>,
    pub source: String,
}

/// Precomputed linear frequency interpolation for a fixed list of frequencies.
#[derive(Debug, Clone)]
pub struct FreqSampler {
    nodes: Vec<(usize, usize, f64)>,
    flat: bool,
}

impl FreqSampler {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// True when every frequency maps to the same single node.
    pub fn is_flat(&self) -> bool {
        self.flat
    }
}

impl BeampatternGrid {
    pub fn new(az_axis: Axis, el_axis: Axis, freq_axis: Axis, g_co: Vec<Complex64>, g_xpol: Vec<Complex64>, source: &str) -> Result<Self> {
        let g = BeampatternGrid { az_axis, el_axis, freq_axis, g_co, g_xpol, source: source.to_string() };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        self.az_axis.validate("azimuth")?;
        self.el_axis.validate("elevation")?;
        self.freq_axis.validate("frequency")?;
        let n = self.len();
        if self.g_co.len() != n || self.g_xpol.len() != n {
            return Err(Error::Validation(format!("gain tensors do not match axes ({} nodes expected)", n)));
        }
        if self.g_co.iter().chain(&self.g_xpol).any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Validation("non-finite beampattern sample".into()));
        }
        Ok(())
    }

    fn len(&self) -> usize {
        self.az_axis.count * self.el_axis.count * self.freq_axis.count
    }

    fn index(&self, ia: usize, ie: usize, jf: usize) -> usize {
        (ia * self.el_axis.count + ie) * self.freq_axis.count + jf
    }

    /// 1° azimuth over `[−π, π)`, 1° elevation over `[−π/2, π/2]`, one frequency node.
    pub fn default_axes() -> (Axis, Axis, Axis) {
        let step = PI / 180.0;
        (Axis::new(-PI, step, 360), Axis::new(-FRAC_PI_2, step, 181), Axis::new(0.0, 1.0, 1))
    }

    pub fn isotropic() -> Self {
        let (a, e, f) = Self::default_axes();
        Self::analytic(PatternKind::Isotropic, 0.0, f64::NEG_INFINITY, a, e, f).expect("isotropic pattern is valid")
    }

    pub fn cosine_power(exponent: f64, xpol_floor_db: f64) -> Result<Self> {
        let (a, e, f) = Self::default_axes();
        Self::analytic(PatternKind::CosinePower, exponent, xpol_floor_db, a, e, f)
    }

    /// Frequency-flat analytic pattern sampled on the given axes. Behind the
    /// array (and wherever the cosine lobe falls lower) the gain is held at −40 dB.
    pub fn analytic(kind: PatternKind, exponent: f64, xpol_floor_db: f64, az: Axis, el: Axis, freq: Axis) -> Result<Self> {
        if exponent < 0.0 || !exponent.is_finite() {
            return Err(Error::Domain(format!("pattern exponent {exponent} must be finite and >= 0")));
        }
        let back = 0.01;
        let xscale = if xpol_floor_db == f64::NEG_INFINITY { 0.0 } else { 10f64.powf(xpol_floor_db / 20.0) };
        let n = az.count * el.count * freq.count;
        let mut co = Vec::with_capacity(n);
        let mut xp = Vec::with_capacity(n);
        for ia in 0..az.count {
            let a = az.value(ia);
            for ie in 0..el.count {
                let e = el.value(ie);
                let (c, x) = match kind {
                    PatternKind::Isotropic => (1.0, 0.0),
                    PatternKind::CosinePower => {
                        let g = if a.abs() < FRAC_PI_2 {
                            let ce = e.cos().max(0.0);
                            (a.cos().powf(exponent) * ce.powf(exponent)).max(back)
                        } else {
                            back
                        };
                        (g, g * xscale)
                    }
                };
                for _ in 0..freq.count {
                    co.push(Complex64::new(c, 0.0));
                    xp.push(Complex64::new(x, 0.0));
                }
            }
        }
        let tag = match kind {
            PatternKind::Isotropic => "analytic:isotropic".to_string(),
            PatternKind::CosinePower => format!("analytic:cosine_power(p={exponent},xpol={xpol_floor_db}dB)"),
        };
        Self::new(az, el, freq, co, xp, &tag)
    }

    fn tensor(&self, pol: Polarization) -> &[Complex64] {
        match pol {
            Polarization::Co => &self.g_co,
            Polarization::Xpol => &self.g_xpol,
        }
    }

    fn angle_corners(&self, az: f64, el: f64) -> [(usize, usize, f64); 4] {
        let (a0, a1, ta, _) = self.az_axis.locate(az, self.az_axis.is_periodic());
        let (e0, e1, te, _) = self.el_axis.locate(el, false);
        [(a0, e0, (1.0 - ta) * (1.0 - te)), (a1, e0, ta * (1.0 - te)), (a0, e1, (1.0 - ta) * te), (a1, e1, ta * te)]
    }

    fn angle_value(&self, t: &[Complex64], corners: &[(usize, usize, f64); 4], jf: usize) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &(ia, ie, w) in corners {
            if w != 0.0 {
                acc += t[self.index(ia, ie, jf)] * w;
            }
        }
        acc
    }

    fn freq_node(&self, f: f64) -> (usize, usize, f64) {
        let (j0, j1, t, clamped) = self.freq_axis.locate(f, false);
        if clamped && !CLAMP_WARNED.swap(true, Ordering::Relaxed) {
            log::warn!("frequency {f:.6e} Hz outside beampattern band; clamping to the nearest node");
        }
        (j0, j1, t)
    }

    /// Complex gain at local angles and absolute frequency.
    pub fn eval(&self, az_local: f64, el_local: f64, f: f64, pol: Polarization) -> Complex64 {
        let t = self.tensor(pol);
        let c = self.angle_corners(az_local, el_local);
        let (j0, j1, w) = self.freq_node(f);
        let v0 = self.angle_value(t, &c, j0);
        if w == 0.0 {
            return v0;
        }
        let v1 = self.angle_value(t, &c, j1);
        v0 + (v1 - v0) * w
    }

    pub fn sampler(&self, freqs: &[f64]) -> FreqSampler {
        let nodes: Vec<_> = freqs.iter().map(|&f| self.freq_node(f)).collect();
        let flat = self.freq_axis.count == 1;
        FreqSampler { nodes, flat }
    }

    /// Fills `out` with the gain at each sampler frequency.
    pub fn profile_into(&self, az_local: f64, el_local: f64, pol: Polarization, sampler: &FreqSampler, out: &mut [Complex64]) {
        let t = self.tensor(pol);
        let c = self.angle_corners(az_local, el_local);
        if sampler.flat {
            let v = self.angle_value(t, &c, 0);
            out.iter_mut().for_each(|o| *o = v);
            return;
        }
        let mut cache: Vec<Option<Complex64>> = vec![None; self.freq_axis.count];
        let mut node = |j: usize| *cache[j].get_or_insert_with(|| self.angle_value(t, &c, j));
        for (o, &(j0, j1, w)) in out.iter_mut().zip(&sampler.nodes) {
            let v0 = node(j0);
            *o = if w == 0.0 { v0 } else { v0 + (node(j1) - v0) * w };
        }
    }

    /// Gain at a single direction when the pattern is frequency-flat.
    pub fn flat_value(&self, az_local: f64, el_local: f64, pol: Polarization) -> Complex64 {
        let c = self.angle_corners(az_local, el_local);
        self.angle_value(self.tensor(pol), &c, 0)
    }

    pub fn is_frequency_flat(&self) -> bool {
        self.freq_axis.count == 1
    }

    /// Samples of the gain over the sounder's frequency grid.
    pub fn freq_profile(&self, az_local: f64, el_local: f64, config: &SounderConfig, pol: Polarization) -> Vec<Complex64> {
        let s = self.sampler(&config.frequencies());
        let mut out = vec![Complex64::new(0.0, 0.0); s.len()];
        self.profile_into(az_local, el_local, pol, &s, &mut out);
        out
    }

    /// Band-integrated co-polar power per angular node (trapezoidal in frequency).
    pub fn pattern_pdp(&self, fc: f64, w: f64) -> Result<PatternPdp> {
        let lo = fc - w / 2.0;
        let hi = fc + w / 2.0;
        let fa = self.freq_axis;
        if fa.count > 1 && (hi < fa.start || lo > fa.last()) {
            return Err(Error::Domain(format!("band [{lo:.4e}, {hi:.4e}] Hz does not overlap the pattern frequency axis")));
        }
        let mut pts = vec![lo];
        if fa.count > 1 {
            pts.extend((0..fa.count).map(|j| fa.value(j)).filter(|&f| f > lo && f < hi));
        }
        pts.push(hi);
        let nodes: Vec<_> = pts.iter().map(|&f| {
            let (j0, j1, t, _) = fa.locate(f, false);
            (j0, j1, t)
        }).collect();
        let mut values = Vec::with_capacity(self.az_axis.count * self.el_axis.count);
        for ia in 0..self.az_axis.count {
            for ie in 0..self.el_axis.count {
                let p: Vec<f64> = nodes
                    .iter()
                    .map(|&(j0, j1, t)| {
                        let v0 = self.g_co[self.index(ia, ie, j0)];
                        let v1 = self.g_co[self.index(ia, ie, j1)];
                        (v0 + (v1 - v0) * t).norm_sqr()
                    })
                    .collect();
                let mut acc = 0.0;
                for k in 1..pts.len() {
                    acc += 0.5 * (p[k] + p[k - 1]) * (pts[k] - pts[k - 1]);
                }
                values.push(acc);
            }
        }
        Ok(PatternPdp { az_axis: self.az_axis, el_axis: self.el_axis, values })
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let header = PatternHeader {
            format: "beampattern".into(),
            az_deg: deg_axis(self.az_axis),
            el_deg: deg_axis(self.el_axis),
            freq_hz: self.freq_axis,
            polarizations: vec!["co".into(), "xpol".into()],
            endianness: "little".into(),
            sample: "complex64".into(),
            order: "az,el,freq".into(),
            source: self.source.clone(),
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        let mut buf = Vec::with_capacity(self.len() * 16);
        for c in self.g_co.iter().chain(&self.g_xpol) {
            buf.extend_from_slice(&(c.re as f32).to_le_bytes());
            buf.extend_from_slice(&(c.im as f32).to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write(std::io::BufWriter::new(f))
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut line = String::new();
        r.read_line(&mut line)?;
        if line.trim().is_empty() {
            return Err(Error::Format("beampattern file is empty".into()));
        }
        let h: PatternHeader = serde_json::from_str(line.trim()).map_err(|e| Error::Format(format!("beampattern header: {e}")))?;
        if h.endianness != "little" || h.sample != "complex64" {
            return Err(Error::Format("beampattern samples must be little-endian complex64".into()));
        }
        let has_co = h.polarizations.iter().any(|p| p == "co");
        let has_x = h.polarizations.iter().any(|p| p == "xpol");
        if !has_co || h.polarizations.len() != usize::from(has_co) + usize::from(has_x) {
            return Err(Error::Format(format!("unsupported polarization list {:?}", h.polarizations)));
        }
        let az = rad_axis(h.az_deg);
        let el = rad_axis(h.el_deg);
        az.validate("azimuth")?;
        el.validate("elevation")?;
        h.freq_hz.validate("frequency")?;
        let n = az.count * el.count * h.freq_hz.count;
        let mut data = Vec::new();
        r.read_to_end(&mut data)?;
        let tensors = if has_x { 2 } else { 1 };
        if data.len() != n * tensors * 8 {
            return Err(Error::Format(format!("expected {} payload bytes, found {}", n * tensors * 8, data.len())));
        }
        let samples: Vec<Complex64> = data
            .chunks_exact(8)
            .map(|c| {
                let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
                let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
                Complex64::new(re as f64, im as f64)
            })
            .collect();
        let co = samples[..n].to_vec();
        let xp = if has_x { samples[n..].to_vec() } else { vec![Complex64::new(0.0, 0.0); n] };
        Self::new(az, el, h.freq_hz, co, xp, &h.source)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read(f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternPdp {
    pub az_axis: Axis,
    pub el_axis: Axis,
    pub values: Vec<f64>,
}

impl PatternPdp {
    pub fn at(&self, ia: usize, ie: usize) -> f64 {
        self.values[ia * self.el_axis.count + ie]
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct PatternHeader {
    format: String,
    az_deg: Axis,
    el_deg: Axis,
    freq_hz: Axis,
    polarizations: Vec<String>,
    endianness: String,
    sample: String,
    order: String,
    #[serde(default)]
    source: String,
}

fn deg_axis(a: Axis) -> Axis {
    Axis::new(a.start.to_degrees(), a.step.to_degrees(), a.count)
}

fn rad_axis(a: Axis) -> Axis {
    Axis::new(a.start.to_radians(), a.step.to_radians(), a.count)
}
