//! Physical parameters of the photon source and the GRIN medium.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default threshold on `k * a_x` above which the paraxial reduction is trusted.
pub const DEFAULT_PARAXIAL_THRESHOLD: f64 = 100.0;

/// Wavelength of the down-converted photons, 795 nm, in mm.
pub const WAVELENGTH_795NM: f64 = 795e-6;

/// Gaussian waist of the prepared transverse mode, in mm.
pub const WAIST_MM: f64 = 0.4;

/// Length of one oscillation cycle inside the GRIN lens, in mm.
pub const GRIN_CYCLE_MM: f64 = 30.26;

/// GRIN gradient constant, in mm^-2.
pub const GRIN_GRADIENT_CONSTANT: f64 = 0.043;

/// Peak refractive index of the GRIN lens.
pub const GRIN_PEAK_INDEX: f64 = 1.643;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Wavelength in mm.
    pub wavelength: f64,
    /// Gaussian waist `a_x` in mm, defined by `|psi|^2 ~ exp(-x^2 / a_x^2)`.
    pub waist: f64,
    /// Harmonic angular frequency in rad per mm of propagation; zero for free space.
    pub omega: f64,
}

impl PhysicalParams {
    pub fn new(wavelength: f64, waist: f64, omega: f64) -> Result<Self> {
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(Error::param(
                "wavelength",
                format!("must be > 0, got {wavelength}"),
            ));
        }
        if !(waist > 0.0 && waist.is_finite()) {
            return Err(Error::param("waist", format!("must be > 0, got {waist}")));
        }
        if !(omega >= 0.0 && omega.is_finite()) {
            return Err(Error::param("omega", format!("must be >= 0, got {omega}")));
        }
        Ok(Self {
            wavelength,
            waist,
            omega,
        })
    }

    /// Experimental values: 795 nm photons, 0.4 mm waist, GRIN cycle of 30.26 mm.
    pub fn experiment() -> Self {
        Self {
            wavelength: WAVELENGTH_795NM,
            waist: WAIST_MM,
            omega: 2.0 * PI / GRIN_CYCLE_MM,
        }
    }

    /// Propagation wavenumber, which is also the effective transverse mass.
    pub fn k(&self) -> f64 {
        2.0 * PI / self.wavelength
    }
}

/// Harmonic frequency of a GRIN medium `n(r) = n0 (1 - A r^2 / 2)`.
///
/// With a measured cycle length the frequency is `2π/T`; otherwise the
/// ray-optics pitch `sqrt(A)` is used. The two disagree slightly for the
/// experimental lens (0.20764 vs 0.20736 rad/mm).
pub fn grin_omega(n0: f64, gradient_constant: f64, cycle_override: Option<f64>) -> Result<f64> {
    if !(n0 > 0.0) {
        return Err(Error::param("n0", format!("must be > 0, got {n0}")));
    }
    match cycle_override {
        Some(t) if t > 0.0 && t.is_finite() => Ok(2.0 * PI / t),
        Some(t) => Err(Error::param(
            "cycle_length",
            format!("must be > 0, got {t}"),
        )),
        None if gradient_constant > 0.0 && gradient_constant.is_finite() => {
            Ok(gradient_constant.sqrt())
        }
        None => Err(Error::param(
            "gradient_constant",
            format!("must be > 0, got {gradient_constant}"),
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParaxialCheck {
    /// `k * a_x`.
    pub ratio: f64,
    pub threshold: f64,
    pub passes: bool,
}

pub fn check_paraxial(params: &PhysicalParams, threshold: f64) -> ParaxialCheck {
    let ratio = params.k() * params.waist;
    ParaxialCheck {
        ratio,
        threshold,
        passes: ratio >= threshold,
    }
}
