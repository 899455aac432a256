//! Noisy multi-rotation space-frequency measurements from a list of paths.

use std::f64::consts::TAU;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha1::{Digest, Sha1};

use crate::beampattern::{BeampatternGrid, Polarization};
use crate::config::SounderConfig;
use crate::error::{Error, Result};
use crate::geometry::global_to_local_unchecked;
use crate::mpc::{MpcParam, PolAmplitude};

pub const LAYOUT_TAG: &str = "x-fastest,y,freq";

/// `exp(−j2πθm)` for `m = 0..n`.
pub fn steering_vector(n: usize, theta: f64) -> Vec<Complex64> {
    (0..n).map(|m| Complex64::cis(-TAU * theta * m as f64)).collect()
}

/// V-port output for a V-excited transmitter with unit TX gains; the RX
/// cross-polar gain stands in for both off-diagonal terms by reciprocity.
pub fn effective_v_amplitude(amp: &PolAmplitude, g_co: Complex64, g_xpol: Complex64) -> Complex64 {
    g_co * amp.vv + g_xpol * amp.hv + g_co * amp.vh + g_xpol * amp.hh
}

/// Noise-free tensor for one rotation, vectorized as `(k·Ny + y)·Nx + x`.
pub fn synthesize(mpcs: &[MpcParam], config: &SounderConfig, pattern: &BeampatternGrid, rotation: f64) -> Result<Vec<Complex64>> {
    let (nx, ny, nf) = (config.nx, config.ny, config.n_freq);
    let freqs = config.frequencies();
    let sampler = pattern.sampler(&freqs);
    let ratio = config.spacing_ratio();
    let tx = config.tx_amplitude();
    let mut out = vec![Complex64::new(0.0, 0.0); nx * ny * nf];
    let mut g_co = vec![Complex64::new(0.0, 0.0); nf];
    let mut g_x = vec![Complex64::new(0.0, 0.0); nf];
    let mut plane = vec![Complex64::new(0.0, 0.0); nx * ny];
    for m in mpcs {
        m.validate()?;
        if m.delay > config.duration_t {
            return Err(Error::DelayOutOfRange { id: m.id, delay: m.delay, max: config.duration_t });
        }
        let l = global_to_local_unchecked(m.az_global, m.el_global, rotation, ratio);
        pattern.profile_into(l.az_local, l.el_local, Polarization::Co, &sampler, &mut g_co);
        pattern.profile_into(l.az_local, l.el_local, Polarization::Xpol, &sampler, &mut g_x);
        let ax = steering_vector(nx, l.theta_x);
        let ay = steering_vector(ny, l.theta_y);
        for y in 0..ny {
            let cy = ay[y].conj();
            for x in 0..nx {
                plane[y * nx + x] = ax[x] * cy;
            }
        }
        for k in 0..nf {
            let a = effective_v_amplitude(&m.amp, g_co[k], g_x[k]) * tx * Complex64::cis(-TAU * m.delay * freqs[k]);
            let row = &mut out[k * nx * ny..(k + 1) * nx * ny];
            for (o, p) in row.iter_mut().zip(&plane) {
                *o += a * p;
            }
        }
    }
    Ok(out)
}

/// Adds circular complex Gaussian noise of variance `noise_psd·Δf` per sample.
/// `stream` selects an independent sub-sequence of the seeded generator.
pub fn add_noise(tensor: &mut [Complex64], noise_psd: f64, delta_f: f64, seed: u64, stream: u64) {
    if noise_psd <= 0.0 {
        return;
    }
    let sd = (noise_psd * delta_f / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    for v in tensor.iter_mut() {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        *v += Complex64::new(re * sd, im * sd);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Synthetic,
    Measured,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub config: SounderConfig,
    pub tensors: Vec<Vec<Complex64>>,
    pub seed: u64,
    pub tx_power_dbm: f64,
    pub provenance: Provenance,
}

pub fn synthesize_multi_fov(mpcs: &[MpcParam], config: &SounderConfig, pattern: &BeampatternGrid, seed: u64) -> Result<MeasurementSet> {
    config.validate()?;
    let tensors = config
        .rotations
        .par_iter()
        .enumerate()
        .map(|(i, &rot)| {
            let mut t = synthesize(mpcs, config, pattern, rot)?;
            add_noise(&mut t, config.noise_psd, config.delta_f(), seed, i as u64);
            Ok(t)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MeasurementSet { config: config.clone(), tensors, seed, tx_power_dbm: config.tx_power_dbm, provenance: Provenance::Synthetic })
}

#[derive(Debug, Serialize, Deserialize)]
struct MeasurementHeader {
    format: String,
    config: SounderConfig,
    rotations_deg: Vec<f64>,
    seed: u64,
    tx_power_dbm: f64,
    provenance: Provenance,
    layout: String,
    sample: String,
    endianness: String,
}

impl MeasurementSet {
    pub fn new(config: SounderConfig, tensors: Vec<Vec<Complex64>>, provenance: Provenance) -> Result<Self> {
        let m = MeasurementSet { tx_power_dbm: config.tx_power_dbm, config, tensors, seed: 0, provenance };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.tensors.len() != self.config.rotations.len() {
            return Err(Error::Validation(format!("{} tensors for {} rotations", self.tensors.len(), self.config.rotations.len())));
        }
        let n = self.config.samples();
        if self.tensors.iter().any(|t| t.len() != n) {
            return Err(Error::Validation(format!("tensor length differs from nx*ny*n_freq = {n}")));
        }
        Ok(())
    }

    pub fn energy(&self) -> f64 {
        self.tensors.iter().flatten().map(|c| c.norm_sqr()).sum()
    }

    /// Keeps only the listed rotations (in the given order).
    pub fn select_rotations(&self, which: &[usize]) -> Result<Self> {
        let rotations = which.iter().map(|&i| self.config.rotations[i]).collect();
        let config = self.config.clone().with_rotations(rotations)?;
        let tensors = which.iter().map(|&i| self.tensors[i].clone()).collect();
        Ok(MeasurementSet { config, tensors, ..self.clone() })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = MeasurementHeader {
            format: "measurement".into(),
            config: self.config.clone(),
            rotations_deg: self.config.rotations.iter().map(|r| r.to_degrees()).collect(),
            seed: self.seed,
            tx_power_dbm: self.tx_power_dbm,
            provenance: self.provenance,
            layout: LAYOUT_TAG.into(),
            sample: "complex128".into(),
            endianness: "little".into(),
        };
        let mut out = serde_json::to_vec(&header)?;
        out.push(b'\n');
        out.reserve(self.tensors.len() * self.config.samples() * 16);
        for c in self.tensors.iter().flatten() {
            out.extend_from_slice(&c.re.to_le_bytes());
            out.extend_from_slice(&c.im.to_le_bytes());
        }
        Ok(out)
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&self.to_bytes()?)?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut line = String::new();
        r.read_line(&mut line)?;
        if line.trim().is_empty() {
            return Err(Error::Format("measurement file is empty".into()));
        }
        let h: MeasurementHeader = serde_json::from_str(line.trim()).map_err(|e| Error::Format(format!("measurement header: {e}")))?;
        if h.layout != LAYOUT_TAG || h.sample != "complex128" || h.endianness != "little" {
            return Err(Error::Format(format!("unsupported layout '{}' / sample '{}'", h.layout, h.sample)));
        }
        h.config.validate().map_err(|e| Error::Format(format!("measurement config: {e}")))?;
        let n = h.config.samples();
        let nrot = h.config.rotations.len();
        let mut data = Vec::new();
        r.read_to_end(&mut data)?;
        if data.len() != n * nrot * 16 {
            return Err(Error::Format(format!("expected {} payload bytes, found {}", n * nrot * 16, data.len())));
        }
        let samples: Vec<Complex64> = data
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().unwrap());
                let im = f64::from_le_bytes(c[8..].try_into().unwrap());
                Complex64::new(re, im)
            })
            .collect();
        if samples.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Format("non-finite measurement sample".into()));
        }
        let tensors = samples.chunks_exact(n).map(|c| c.to_vec()).collect();
        Ok(MeasurementSet { config: h.config, tensors, seed: h.seed, tx_power_dbm: h.tx_power_dbm, provenance: h.provenance })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read(f)
    }
}

/// Git blob hash (`sha1("blob <len>\0" ++ bytes)`), lowercase hex.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
