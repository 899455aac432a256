//! Multipath component parameters and the ground-truth CSV format.

use std::f64::consts::{PI, TAU};
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{deg, rad};

/// 2×2 polarimetric amplitude, first letter RX polarization, second TX.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PolAmplitude {
    pub vv: Complex64,
    pub vh: Complex64,
    pub hv: Complex64,
    pub hh: Complex64,
}

impl PolAmplitude {
    pub fn co_polar(a: Complex64) -> Self {
        PolAmplitude { vv: a, ..Default::default() }
    }

    pub fn scaled(&self, s: f64) -> Self {
        PolAmplitude { vv: self.vv * s, vh: self.vh * s, hv: self.hv * s, hh: self.hh * s }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcParam {
    pub id: i64,
    pub az_global: f64,
    pub el_global: f64,
    pub delay: f64,
    pub amp: PolAmplitude,
}

impl MpcParam {
    pub fn new(id: i64, az_global: f64, el_global: f64, delay: f64, amp: PolAmplitude) -> Result<Self> {
        let m = MpcParam { id, az_global, el_global, delay, amp };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..TAU).contains(&self.az_global) {
            return Err(Error::Validation(format!("component {}: azimuth {} outside [0, 2pi)", self.id, self.az_global)));
        }
        if !(0.0..=PI).contains(&self.el_global) {
            return Err(Error::Validation(format!("component {}: elevation {} outside [0, pi]", self.id, self.el_global)));
        }
        if !(self.delay >= 0.0) || !self.delay.is_finite() {
            return Err(Error::Validation(format!("component {}: delay {} must be finite and >= 0", self.id, self.delay)));
        }
        let a = &self.amp;
        if [a.vv, a.vh, a.hv, a.hh].iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Validation(format!("component {}: non-finite amplitude", self.id)));
        }
        if a.hv.norm() > a.vv.norm() || a.vh.norm() > a.hh.norm() {
            log::warn!("component {}: cross-polar amplitude exceeds co-polar", self.id);
        }
        Ok(())
    }

    pub fn power_vv(&self) -> f64 {
        self.amp.vv.norm_sqr()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct GtRow {
    id: i64,
    az_deg: f64,
    el_deg: f64,
    delay_ns: f64,
    #[serde(rename = "aVV_re")]
    avv_re: f64,
    #[serde(rename = "aVV_im")]
    avv_im: f64,
    #[serde(rename = "aVH_re")]
    avh_re: f64,
    #[serde(rename = "aVH_im")]
    avh_im: f64,
    #[serde(rename = "aHV_re")]
    ahv_re: f64,
    #[serde(rename = "aHV_im")]
    ahv_im: f64,
    #[serde(rename = "aHH_re")]
    ahh_re: f64,
    #[serde(rename = "aHH_im")]
    ahh_im: f64,
}

pub fn read_gt_csv<R: Read>(reader: R) -> Result<Vec<MpcParam>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let r: GtRow = row?;
        if !(0.0..360.0).contains(&r.az_deg) || !(0.0..=180.0).contains(&r.el_deg) {
            return Err(Error::Validation(format!("component {}: angles ({}, {}) deg out of range", r.id, r.az_deg, r.el_deg)));
        }
        let amp = PolAmplitude {
            vv: Complex64::new(r.avv_re, r.avv_im),
            vh: Complex64::new(r.avh_re, r.avh_im),
            hv: Complex64::new(r.ahv_re, r.ahv_im),
            hh: Complex64::new(r.ahh_re, r.ahh_im),
        };
        let az = rad(r.az_deg);
        out.push(MpcParam::new(r.id, if az >= TAU { 0.0 } else { az }, rad(r.el_deg).min(PI), r.delay_ns * 1e-9, amp)?);
    }
    Ok(out)
}

pub fn load_gt_csv(path: &Path) -> Result<Vec<MpcParam>> {
    let f = std::fs::File::open(path)?;
    read_gt_csv(f)
}

pub fn write_gt_csv<W: Write>(writer: W, mpcs: &[MpcParam]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for m in mpcs {
        w.serialize(GtRow {
            id: m.id,
            az_deg: deg(m.az_global),
            el_deg: deg(m.el_global),
            delay_ns: m.delay * 1e9,
            avv_re: m.amp.vv.re,
            avv_im: m.amp.vv.im,
            avh_re: m.amp.vh.re,
            avh_im: m.amp.vh.im,
            ahv_re: m.amp.hv.re,
            ahv_im: m.amp.hv.im,
            ahh_re: m.amp.hh.re,
            ahh_im: m.amp.hh.im,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_gt_csv(path: &Path, mpcs: &[MpcParam]) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_gt_csv(f, mpcs)
}
