//! Sounder configuration, frequency grid and the built-in array presets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rad, wrap_2pi, SPEED_OF_LIGHT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SounderConfig {
    pub fc: f64,
    pub bandwidth_w: f64,
    pub n_freq: usize,
    pub duration_t: f64,
    pub nx: usize,
    pub ny: usize,
    pub spacing_d: f64,
    pub rotations: Vec<f64>,
    pub tx_power_dbm: f64,
    pub noise_psd: f64,
}

pub const PRESET_NAMES: [&str; 4] = ["17x17-1GHz", "17x17-2GHz", "35x35-1GHz", "35x35-2GHz"];

pub fn default_rotations() -> Vec<f64> {
    vec![rad(90.0), rad(210.0), rad(330.0)]
}

impl SounderConfig {
    /// Builds a config with `n_freq = round(T·W)`.
    pub fn new(fc: f64, bandwidth_w: f64, duration_t: f64, nx: usize, ny: usize, spacing_d: f64) -> Result<Self> {
        let cfg = SounderConfig {
            fc,
            bandwidth_w,
            n_freq: (duration_t * bandwidth_w).round() as usize,
            duration_t,
            nx,
            ny,
            spacing_d,
            rotations: default_rotations(),
            tx_power_dbm: 30.0,
            noise_psd: 1.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// One of the four built-in 28 GHz presets (3.75 mm spacing, 64 ns window).
    pub fn preset(name: &str) -> Result<Self> {
        let (n, w) = match name {
            "17x17-1GHz" => (17, 1e9),
            "17x17-2GHz" => (17, 2e9),
            "35x35-1GHz" => (35, 1e9),
            "35x35-2GHz" => (35, 2e9),
            other => return Err(Error::Config(format!("unknown sounder preset '{other}'"))),
        };
        Self::new(28e9, w, 64e-9, n, n, 3.75e-3)
    }

    pub fn with_rotations(mut self, rotations: Vec<f64>) -> Result<Self> {
        self.rotations = rotations;
        self.validate()?;
        Ok(self)
    }

    pub fn with_noise_psd(mut self, noise_psd: f64) -> Self {
        self.noise_psd = noise_psd;
        self
    }

    /// Sets the noise level so that a unit-amplitude path has the given
    /// per-sample SNR after TX scaling.
    pub fn with_snr_db(mut self, snr_db: f64) -> Self {
        let per_bin = self.tx_amplitude().powi(2) * 10f64.powf(-snr_db / 10.0);
        self.noise_psd = per_bin / self.delta_f();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.fc, self.bandwidth_w, self.duration_t, self.spacing_d, self.tx_power_dbm, self.noise_psd];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("non-finite sounder parameter".into()));
        }
        if self.fc <= 0.0 || self.bandwidth_w <= 0.0 || self.duration_t <= 0.0 || self.spacing_d <= 0.0 {
            return Err(Error::Config("fc, W, T and spacing must be positive".into()));
        }
        if self.bandwidth_w / 2.0 >= self.fc {
            return Err(Error::Config("band extends below 0 Hz".into()));
        }
        if self.nx == 0 || self.ny == 0 || self.n_freq == 0 {
            return Err(Error::Config("element and frequency counts must be at least 1".into()));
        }
        let expected = (self.duration_t * self.bandwidth_w).round() as usize;
        if expected != self.n_freq {
            return Err(Error::Config(format!("n_freq {} does not equal round(T*W) = {expected}", self.n_freq)));
        }
        if self.noise_psd < 0.0 {
            return Err(Error::Config("noise_psd must be non-negative".into()));
        }
        if self.rotations.is_empty() {
            return Err(Error::Config("at least one rotation is required".into()));
        }
        for (i, a) in self.rotations.iter().enumerate() {
            if !a.is_finite() {
                return Err(Error::Config("non-finite rotation".into()));
            }
            for b in &self.rotations[..i] {
                let d = wrap_2pi(a - b);
                if d < 1e-9 || d > std::f64::consts::TAU - 1e-9 {
                    return Err(Error::Config("rotations must be distinct modulo 2pi".into()));
                }
            }
        }
        let top = SPEED_OF_LIGHT / (self.fc + self.bandwidth_w / 2.0);
        if self.spacing_d / top > 0.5 + 1e-12 {
            log::warn!("element spacing {:.3} wavelengths at the top of the band admits grating lobes", self.spacing_d / top);
        }
        Ok(())
    }

    pub fn lambda(&self) -> f64 {
        SPEED_OF_LIGHT / self.fc
    }

    /// Element spacing in wavelengths at the carrier.
    pub fn spacing_ratio(&self) -> f64 {
        self.spacing_d / self.lambda()
    }

    pub fn delta_f(&self) -> f64 {
        1.0 / self.duration_t
    }

    /// Bin-center frequencies `fc − W/2 + (k + ½)Δf`, `k = 0..N`.
    pub fn frequencies(&self) -> Vec<f64> {
        let df = self.delta_f();
        let f0 = self.fc - self.bandwidth_w / 2.0;
        (0..self.n_freq).map(|k| f0 + (k as f64 + 0.5) * df).collect()
    }

    pub fn tx_amplitude(&self) -> f64 {
        10f64.powf((self.tx_power_dbm - 30.0) / 10.0).sqrt()
    }

    /// Noise variance per frequency bin and element.
    pub fn noise_variance(&self) -> f64 {
        self.noise_psd * self.delta_f()
    }

    pub fn elements(&self) -> usize {
        self.nx * self.ny
    }

    /// Samples per rotation.
    pub fn samples(&self) -> usize {
        self.nx * self.ny * self.n_freq
    }

    pub fn delay_resolution(&self) -> f64 {
        1.0 / self.bandwidth_w
    }

    /// Broadside angular resolution for an aperture of `n` elements.
    pub fn angular_resolution(&self, n: usize) -> f64 {
        let s = 1.0 / (n as f64 * self.spacing_ratio());
        if s >= 1.0 {
            std::f64::consts::PI
        } else {
            s.asin()
        }
    }

    pub fn az_resolution(&self) -> f64 {
        self.angular_resolution(self.nx)
    }

    pub fn el_resolution(&self) -> f64 {
        self.angular_resolution(self.ny)
    }
}
