//! Closed-form propagators, propagator products and classical trajectories.

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::Potential;

/// Tolerance on `|sin ω τ|` below which the harmonic kernel is treated as a caustic.
pub const FOCAL_TOLERANCE: f64 = 1e-9;

/// Fixed endpoints `(x_a, z_a)` and `(x_b, z_b)` of a transition amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Endpoints {
    pub x_a: f64,
    pub z_a: f64,
    pub x_b: f64,
    pub z_b: f64,
}

impl Endpoints {
    pub fn new(x_a: f64, z_a: f64, x_b: f64, z_b: f64) -> Result<Self> {
        if !(z_b > z_a) || !z_a.is_finite() || !z_b.is_finite() {
            return Err(Error::InvalidInterval {
                z_start: z_a,
                z_end: z_b,
            });
        }
        if !x_a.is_finite() || !x_b.is_finite() {
            return Err(Error::param("endpoints", "positions must be finite"));
        }
        Ok(Self { x_a, z_a, x_b, z_b })
    }

    pub fn duration(&self) -> f64 {
        self.z_b - self.z_a
    }

    pub(crate) fn check_inside(&self, z: f64) -> Result<()> {
        if z > self.z_a && z < self.z_b {
            Ok(())
        } else {
            Err(Error::param(
                "z",
                format!(
                    "intermediate time {z} mm must lie strictly inside ({}, {})",
                    self.z_a, self.z_b
                ),
            ))
        }
    }
}

fn interval(z_a: f64, z_b: f64) -> Result<f64> {
    let dz = z_b - z_a;
    if dz > 0.0 && dz.is_finite() {
        Ok(dz)
    } else {
        Err(Error::InvalidInterval {
            z_start: z_a,
            z_end: z_b,
        })
    }
}

/// Free-space kernel `sqrt(k / (2πi τ)) exp(i k (x_b - x_a)² / (2τ))`, with `sqrt(i) = e^{iπ/4}`.
pub fn free_propagator(x_b: f64, z_b: f64, x_a: f64, z_a: f64, k: f64) -> Result<Complex64> {
    let tau = interval(z_a, z_b)?;
    let d = x_b - x_a;
    let amplitude = (k / (2.0 * PI * tau)).sqrt();
    Ok(Complex64::from_polar(
        amplitude,
        k * d * d / (2.0 * tau) - FRAC_PI_4,
    ))
}

/// Harmonic-oscillator (Mehler) kernel for effective mass `k` and frequency `omega`.
///
/// The prefactor phase follows the continuous branch through the caustics:
/// each focal point crossed adds `-π/2`, so for `ω τ < π` the prefactor is
/// the familiar `sqrt(k ω / (2πi sin ω τ))`.
pub fn harmonic_propagator(
    x_b: f64,
    z_b: f64,
    x_a: f64,
    z_a: f64,
    k: f64,
    omega: f64,
) -> Result<Complex64> {
    let tau = interval(z_a, z_b)?;
    if omega == 0.0 {
        return free_propagator(x_b, z_b, x_a, z_a, k);
    }
    let wt = omega * tau;
    let s = wt.sin();
    if s.abs() < FOCAL_TOLERANCE {
        return Err(Error::FocalSingularity {
            sin_abs: s.abs(),
            tolerance: FOCAL_TOLERANCE,
        });
    }
    let amplitude = (k * omega / (2.0 * PI * s.abs())).sqrt();
    let crossings = (wt / PI).floor();
    let prefactor_phase = -FRAC_PI_4 - 0.5 * PI * crossings;
    let action = k * omega / (2.0 * s) * ((x_a * x_a + x_b * x_b) * wt.cos() - 2.0 * x_a * x_b);
    Ok(Complex64::from_polar(amplitude, action + prefactor_phase))
}

/// Analytic kernel `K(x_b, z_b; x_a, z_a)` for the given potential.
pub fn propagator(
    potential: &Potential,
    x_b: f64,
    z_b: f64,
    x_a: f64,
    z_a: f64,
    k: f64,
) -> Result<Complex64> {
    match *potential {
        Potential::Free => free_propagator(x_b, z_b, x_a, z_a, k),
        Potential::Harmonic { omega } => harmonic_propagator(x_b, z_b, x_a, z_a, k, omega),
    }
}

/// `Π(x, z) = K(x_b, z_b; x, z) K(x, z; x_a, z_a)`.
pub fn pi_product(
    x: f64,
    z: f64,
    endpoints: &Endpoints,
    potential: &Potential,
    k: f64,
) -> Result<Complex64> {
    endpoints.check_inside(z)?;
    let right = propagator(potential, endpoints.x_b, endpoints.z_b, x, z, k)?;
    let left = propagator(potential, x, z, endpoints.x_a, endpoints.z_a, k)?;
    Ok(right * left)
}

/// Classical position at time `z` on the path joining the endpoints.
pub fn classical_trajectory(endpoints: &Endpoints, potential: &Potential, z: f64) -> Result<f64> {
    endpoints.check_inside(z)?;
    let Endpoints { x_a, z_a, x_b, z_b } = *endpoints;
    match *potential {
        Potential::Free | Potential::Harmonic { omega: 0.0 } => {
            Ok(x_a + (x_b - x_a) * (z - z_a) / (z_b - z_a))
        }
        Potential::Harmonic { omega } => {
            let s = (omega * (z_b - z_a)).sin();
            if s.abs() < FOCAL_TOLERANCE {
                return Err(Error::FocalSingularity {
                    sin_abs: s.abs(),
                    tolerance: FOCAL_TOLERANCE,
                });
            }
            Ok((x_a * (omega * (z_b - z)).sin() + x_b * (omega * (z - z_a)).sin()) / s)
        }
    }
}

/// Coefficient `a` of `x²` in the phase of `Π(x, z)`.
pub fn pi_phase_curvature(
    endpoints: &Endpoints,
    potential: &Potential,
    z: f64,
    k: f64,
) -> Result<f64> {
    endpoints.check_inside(z)?;
    let t1 = z - endpoints.z_a;
    let t2 = endpoints.z_b - z;
    let a = match *potential {
        Potential::Harmonic { omega } if omega != 0.0 => {
            let (s1, s2) = ((omega * t1).sin(), (omega * t2).sin());
            if s1.abs() < FOCAL_TOLERANCE || s2.abs() < FOCAL_TOLERANCE {
                return Err(Error::FocalSingularity {
                    sin_abs: s1.abs().min(s2.abs()),
                    tolerance: FOCAL_TOLERANCE,
                });
            }
            0.5 * k * omega * ((omega * t1).cos() / s1 + (omega * t2).cos() / s2)
        }
        _ => 0.5 * k * (1.0 / t1 + 1.0 / t2),
    };
    Ok(a)
}

/// Stationary-phase width `1/sqrt|a|` of the `x` integral over `Π(x, z)`.
pub fn stationary_phase_width(
    endpoints: &Endpoints,
    potential: &Potential,
    z: f64,
    k: f64,
) -> Result<f64> {
    let a = pi_phase_curvature(endpoints, potential, z, k)?;
    if a.abs() < f64::MIN_POSITIVE {
        return Err(Error::FocalSingularity {
            sin_abs: 0.0,
            tolerance: FOCAL_TOLERANCE,
        });
    }
    Ok(1.0 / a.abs().sqrt())
}

/// Outcome of a numerical Chapman–Kolmogorov composition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompositionReport {
    pub integral: Complex64,
    pub exact: Complex64,
    pub relative_error: f64,
    /// Stationary-phase width of the integrand (mm).
    pub width: f64,
    /// Total integration span (mm).
    pub span: f64,
    pub samples: usize,
}

/// Asymptotic value of `∫_X^∞ f` for `f = A e^{iφ}` with slowly varying `A`,
/// from the first two terms of the integration-by-parts series.
fn upper_tail(f: Complex64, dphi: f64, d2phi: f64) -> Complex64 {
    f * Complex64::new(d2phi / dphi.powi(3), 1.0 / dphi)
}

/// Phase increments between three neighbouring samples, giving `φ'` and
/// `φ''` at the middle one.
fn phase_derivatives(prev: Complex64, mid: Complex64, next: Complex64, h: f64) -> (f64, f64) {
    let fwd = (next / mid).arg();
    let bwd = (mid / prev).arg();
    (0.5 * (fwd + bwd) / h, (fwd - bwd) / (h * h))
}

/// Numerically integrates `Π(x, z)` over `x` and compares with `K(x_b, z_b; x_a, z_a)`.
///
/// The trapezoid rule runs over `n` samples spanning `widths` stationary-phase
/// widths centred on the classical position; the truncated oscillatory tails
/// are added from their asymptotic expansion. The grid must resolve the
/// local phase frequency at the edges, otherwise the quadrature aliases.
pub fn chapman_kolmogorov(
    endpoints: &Endpoints,
    potential: &Potential,
    z: f64,
    k: f64,
    widths: f64,
    n: usize,
) -> Result<CompositionReport> {
    if n < 5 {
        return Err(Error::InsufficientSamples {
            needed: 5,
            available: n,
        });
    }
    if !(widths > 0.0) {
        return Err(Error::param("widths", format!("must be > 0, got {widths}")));
    }
    let a = pi_phase_curvature(endpoints, potential, z, k)?;
    let width = 1.0 / a.abs().sqrt();
    let centre = classical_trajectory(endpoints, potential, z)?;
    let span = widths * width;
    let h = span / (n - 1) as f64;
    // Local phase frequency at the edges is |2a (span/2)|; it must stay below π/h.
    let edge_frequency = a.abs() * span;
    if edge_frequency * h >= PI {
        return Err(Error::InvalidGrid(format!(
            "integration grid aliases: edge phase step {:.3} rad exceeds π; use more than {} samples",
            edge_frequency * h,
            n
        )));
    }
    let x0 = centre - 0.5 * span;
    let values: Vec<Complex64> = (0..n)
        .map(|j| pi_product(x0 + j as f64 * h, z, endpoints, potential, k))
        .collect::<Result<_>>()?;

    let interior: Complex64 = values[1..n - 1].iter().sum();
    let trapezoid = (interior + 0.5 * (values[0] + values[n - 1])) * h;

    let (d1_hi, d2_hi) = phase_derivatives(values[n - 3], values[n - 2], values[n - 1], h);
    // Shift the derivative from the middle sample to the endpoint.
    let upper = upper_tail(values[n - 1], d1_hi + d2_hi * h, d2_hi);
    let (d1_lo, d2_lo) = phase_derivatives(values[0], values[1], values[2], h);
    // ∫_{-∞}^{X} f(x) dx = ∫_{-X}^{∞} f(-y) dy; the mirrored phase has φ' negated.
    let lower = upper_tail(values[0], -(d1_lo - d2_lo * h), d2_lo);

    let integral = trapezoid + upper + lower;
    let exact = propagator(
        potential,
        endpoints.x_b,
        endpoints.z_b,
        endpoints.x_a,
        endpoints.z_a,
        k,
    )?;
    Ok(CompositionReport {
        integral,
        exact,
        relative_error: (integral - exact).norm() / exact.norm(),
        width,
        span,
        samples: n,
    })
}
