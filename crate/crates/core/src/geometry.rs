//! Angle conventions and field-of-view geometry for rotated planar arrays.
//!
//! Global azimuth lives in `[0, 2π)` and global elevation is the polar angle
//! in `[0, π]` (horizon at `π/2`). Local angles are measured from the array
//! broadside: azimuth in `[−π, π)`, elevation in `[−π/2, π/2]`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

const ANGLE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalAngles {
    pub az_local: f64,
    pub el_local: f64,
    pub theta_x: f64,
    pub theta_y: f64,
}

/// Wraps into `[0, 2π)`.
pub fn wrap_2pi(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Wraps into `[−π, π)`.
pub fn wrap_pi(a: f64) -> f64 {
    let w = wrap_2pi(a + PI) - PI;
    if w >= PI {
        -PI
    } else {
        w
    }
}

/// Smallest absolute angular difference, in `[0, π]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    wrap_pi(a - b).abs()
}

/// Spatial frequencies (cycles per element) seen by the array.
pub fn az_el_to_spatial_freq(az_local: f64, el_local: f64, d: f64, lambda: f64) -> Result<(f64, f64)> {
    if !(-PI - ANGLE_SLACK..PI).contains(&az_local) {
        return Err(Error::Domain(format!("local azimuth {az_local} outside [-pi, pi)")));
    }
    if el_local.abs() > FRAC_PI_2 + ANGLE_SLACK {
        return Err(Error::Domain(format!("local elevation {el_local} outside [-pi/2, pi/2]")));
    }
    if !(d > 0.0 && lambda > 0.0) {
        return Err(Error::Domain("spacing and wavelength must be positive".into()));
    }
    Ok(spatial_freq(az_local, el_local, d / lambda))
}

#[inline]
pub(crate) fn spatial_freq(az_local: f64, el_local: f64, ratio: f64) -> (f64, f64) {
    let (s_az, _) = az_local.sin_cos();
    let (s_el, c_el) = el_local.sin_cos();
    (ratio * s_az * c_el, ratio * s_el)
}

fn check_global(az_global: f64, el_global: f64) -> Result<()> {
    if !(0.0..TAU).contains(&az_global) {
        return Err(Error::Domain(format!("global azimuth {az_global} outside [0, 2pi)")));
    }
    if !(-ANGLE_SLACK..=PI + ANGLE_SLACK).contains(&el_global) {
        return Err(Error::Domain(format!("global elevation {el_global} outside [0, pi]")));
    }
    Ok(())
}

/// Maps global angles into the frame of an array rotated by `phi_rot`.
/// `ratio` is the element spacing in wavelengths.
pub fn global_to_local(az_global: f64, el_global: f64, phi_rot: f64, ratio: f64) -> Result<LocalAngles> {
    check_global(az_global, el_global)?;
    Ok(global_to_local_unchecked(az_global, el_global, phi_rot, ratio))
}

#[inline]
pub(crate) fn global_to_local_unchecked(az_global: f64, el_global: f64, phi_rot: f64, ratio: f64) -> LocalAngles {
    let az_local = wrap_pi(az_global - phi_rot);
    let el_local = FRAC_PI_2 - el_global;
    let (theta_x, theta_y) = spatial_freq(az_local, el_local, ratio);
    LocalAngles { az_local, el_local, theta_x, theta_y }
}

pub fn local_to_global(az_local: f64, el_local: f64, phi_rot: f64) -> (f64, f64) {
    (wrap_2pi(az_local + phi_rot), FRAC_PI_2 - el_local)
}

/// Normalized delay frequency `τ·W/N`, in `[0, 1)` for `τ ∈ [0, T)`.
pub fn delay_frequency(delay: f64, bandwidth: f64, n_freq: usize) -> f64 {
    delay * bandwidth / n_freq as f64
}

/// The front-hemisphere azimuth a planar array cannot tell apart from `az_local`.
pub fn principal_alias(az_local: f64) -> f64 {
    if az_local < -FRAC_PI_2 {
        -PI - az_local
    } else if az_local > FRAC_PI_2 {
        PI - az_local
    } else {
        az_local
    }
}

/// Front/back mirror about the array plane, kept in `[−π, π)`.
pub fn mirror_local(az_local: f64) -> f64 {
    if az_local >= 0.0 {
        wrap_pi(PI - az_local)
    } else {
        wrap_pi(-PI - az_local)
    }
}

/// True iff `az_global ∈ [φ_rot − π/2, φ_rot + π/2)` modulo 2π.
pub fn fov_contains(phi_rot: f64, az_global: f64) -> bool {
    let offset = wrap_2pi(az_global - (phi_rot - FRAC_PI_2));
    offset < PI
}

pub fn deg(rad: f64) -> f64 {
    rad.to_degrees()
}

pub fn rad(deg: f64) -> f64 {
    deg.to_radians()
}
