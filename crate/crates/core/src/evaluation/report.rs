use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::assign::AssociationResult;
use super::cost::gain_ratio_db;
use crate::error::Result;
use crate::geometry::angle_diff;
use crate::mpc::MpcParam;

/// Absolute errors of one associated pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairError {
    pub gt: usize,
    pub est: usize,
    pub az_deg: f64,
    pub el_deg: f64,
    pub delay_ns: f64,
    pub gain_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub p50: f64,
    pub p90: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub pairs: usize,
    pub unmatched_gt: usize,
    pub unmatched_est: usize,
    pub total_cost: f64,
    pub az_deg: Option<Percentiles>,
    pub el_deg: Option<Percentiles>,
    pub delay_ns: Option<Percentiles>,
    pub gain_db: Option<Percentiles>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub errors: Vec<PairError>,
    pub summary: ErrorSummary,
}

/// Linear-interpolation percentile of sorted data, `q` in `[0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64))
}

fn percentiles(values: impl Iterator<Item = f64>) -> Option<Percentiles> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    Some(Percentiles { p50: percentile(&v, 0.5)?, p90: percentile(&v, 0.9)? })
}

pub fn error_report(association: &AssociationResult, gt: &[MpcParam], est: &[MpcParam]) -> ErrorReport {
    let errors: Vec<PairError> = association
        .pairs
        .iter()
        .map(|p| {
            let (g, e) = (&gt[p.gt], &est[p.est]);
            PairError {
                gt: p.gt,
                est: p.est,
                az_deg: angle_diff(g.az_global, e.az_global).to_degrees(),
                el_deg: (g.el_global - e.el_global).abs().to_degrees(),
                delay_ns: (g.delay - e.delay).abs() * 1e9,
                gain_db: gain_ratio_db(g, e).abs(),
            }
        })
        .collect();
    let summary = ErrorSummary {
        pairs: errors.len(),
        unmatched_gt: association.unmatched_gt.len(),
        unmatched_est: association.unmatched_est.len(),
        total_cost: association.total_cost(),
        az_deg: percentiles(errors.iter().map(|e| e.az_deg)),
        el_deg: percentiles(errors.iter().map(|e| e.el_deg)),
        delay_ns: percentiles(errors.iter().map(|e| e.delay_ns)),
        gain_db: percentiles(errors.iter().map(|e| e.gain_db)),
    };
    ErrorReport { errors, summary }
}

impl ErrorReport {
    pub fn is_empty(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for e in &self.errors {
            out.serialize(e)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Writes `errors.csv`, `summary.json` and `cdf.svg` into `dir`.
    pub fn save(&self, dir: &Path, plot: bool) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_csv(std::fs::File::create(dir.join("errors.csv"))?)?;
        std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&self.summary)?)?;
        if plot {
            std::fs::write(dir.join("cdf.svg"), self.cdf_svg())?;
        }
        Ok(())
    }

    /// Empirical CDFs of the four error types, one panel each.
    pub fn cdf_svg(&self) -> String {
        let panels: [(&str, Vec<f64>); 4] = [
            ("AZ error (deg)", self.errors.iter().map(|e| e.az_deg).collect()),
            ("EL error (deg)", self.errors.iter().map(|e| e.el_deg).collect()),
            ("delay error (ns)", self.errors.iter().map(|e| e.delay_ns).collect()),
            ("gain error (dB)", self.errors.iter().map(|e| e.gain_db).collect()),
        ];
        let (pw, ph, pad) = (260.0, 200.0, 40.0);
        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="11">"#, 4.0 * pw, ph + 20.0);
        for (i, (title, mut v)) in panels.into_iter().enumerate() {
            v.sort_by(f64::total_cmp);
            let x0 = i as f64 * pw + pad;
            let (w, h) = (pw - 1.5 * pad, ph - 1.5 * pad);
            let top = pad / 2.0;
            let xmax = v.last().copied().filter(|m| *m > 0.0).unwrap_or(1.0);
            let _ = writeln!(s, r#"<rect x="{x0}" y="{top}" width="{w}" height="{h}" fill="none" stroke="black"/>"#);
            let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{title}</text>"#, x0 + w / 2.0, top + h + 25.0);
            let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{xmax:.3}</text>"#, x0 + w, top + h + 12.0);
            let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">1</text>"#, x0 - 4.0, top + 4.0);
            if v.is_empty() {
                continue;
            }
            let n = v.len() as f64;
            let mut pts = format!("{x0:.2},{:.2}", top + h);
            for (k, x) in v.iter().enumerate() {
                let px = x0 + x / xmax * w;
                let _ = write!(pts, " {px:.2},{:.2} {px:.2},{:.2}", top + h * (1.0 - k as f64 / n), top + h * (1.0 - (k + 1) as f64 / n));
            }
            let _ = writeln!(s, r#"<polyline points="{pts}" fill="none" stroke="steelblue" stroke-width="1.5"/>"#);
        }
        s.push_str("</svg>\n");
        s
    }
}

const COLORS: [&str; 4] = ["black", "crimson", "seagreen", "royalblue"];

/// Azimuth-delay scatter of several path sets; the first set is drawn as
/// open circles, the rest as crosses.
pub fn scatter_svg(series: &[(&str, &[MpcParam])]) -> String {
    let (w, h, pad) = (640.0, 400.0, 50.0);
    let tmax = series.iter().flat_map(|(_, m)| m.iter().map(|p| p.delay * 1e9)).fold(0.0, f64::max).max(1.0);
    let px = |az: f64| pad + az.to_degrees().rem_euclid(360.0) / 360.0 * (w - 1.5 * pad);
    let py = |t: f64| h - pad - t * 1e9 / tmax * (h - 1.5 * pad);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<rect x="{pad}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#, pad / 2.0, w - 1.5 * pad, h - 1.5 * pad);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">AZ (deg)</text>"#, w / 2.0, h - 12.0);
    let _ = writeln!(s, r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">delay (ns)</text>"#, h / 2.0, h / 2.0);
    for deg in [0, 90, 180, 270, 360] {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{deg}</text>"#, px((deg as f64).to_radians().min(std::f64::consts::TAU - 1e-12)), h - pad + 14.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{tmax:.1}</text>"#, pad - 4.0, pad / 2.0 + 4.0);
    for (k, (name, mpcs)) in series.iter().enumerate() {
        let c = COLORS[k % COLORS.len()];
        for m in mpcs.iter() {
            let (x, y) = (px(m.az_global), py(m.delay));
            if k == 0 {
                let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="none" stroke="{c}"/>"#);
            } else {
                let _ = writeln!(s, r#"<path d="M{:.2} {:.2}l6 6m0 -6l-6 6" stroke="{c}"/>"#, x - 3.0, y - 3.0);
            }
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" fill="{c}">{name}</text>"#, w - pad * 1.5 - 90.0, pad / 2.0 + 16.0 + 14.0 * k as f64);
    }
    s.push_str("</svg>\n");
    s
}
