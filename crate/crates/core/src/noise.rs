//! Detector noise and the time-perturbation robustness analysis.

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::gaussian_packet;
use crate::pla::{build_mpp, find_classical_position, FindOptions, MppCurve, TrajectoryConfig};
use crate::potential::Potential;
use crate::propagators::{propagator, Endpoints};
use crate::protocol::{scan_propagator, ScanAxis, ScanRequest};

/// Camera quantum efficiency.
pub const CAMERA_QE: f64 = 0.32;

/// Camera readout noise (electrons per pixel per image).
pub const CAMERA_READOUT_NOISE: f64 = 4.68;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub quantum_efficiency: f64,
    /// Gaussian readout noise, standard deviation in electrons per pixel per image.
    pub readout_noise: f64,
    /// Expected photons summed over every pixel and pointer basis of one scan.
    pub photons_per_scan: f64,
    pub seed: u64,
}

impl DetectorModel {
    pub fn new(
        quantum_efficiency: f64,
        readout_noise: f64,
        photons_per_scan: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(quantum_efficiency > 0.0 && quantum_efficiency <= 1.0) {
            return Err(Error::param(
                "quantum_efficiency",
                format!("must lie in (0, 1], got {quantum_efficiency}"),
            ));
        }
        if !(readout_noise >= 0.0 && readout_noise.is_finite()) {
            return Err(Error::param(
                "readout_noise",
                format!("must be >= 0, got {readout_noise}"),
            ));
        }
        if !(photons_per_scan > 0.0 && photons_per_scan.is_finite()) {
            return Err(Error::param(
                "photons_per_scan",
                format!("must be > 0, got {photons_per_scan}"),
            ));
        }
        Ok(Self {
            quantum_efficiency,
            readout_noise,
            photons_per_scan,
            seed,
        })
    }

    /// Intensified-camera figures: QE 0.32, 4.68 e⁻ readout noise.
    pub fn camera(photons_per_scan: f64, seed: u64) -> Result<Self> {
        Self::new(CAMERA_QE, CAMERA_READOUT_NOISE, photons_per_scan, seed)
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// Independent deterministic stream `(seed, stream)`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed for trial `trial` derived from a master seed.
pub fn trial_seed(master: u64, trial: u64) -> u64 {
    rng_for(master, trial).next_u64()
}

/// Detected electrons per pixel: `Poisson(QE · expected) + N(0, readout_noise)`,
/// clamped at zero. Deterministic for a fixed `(model.seed, stream)`.
pub fn sample_intensities(
    expected: &[f64],
    model: &DetectorModel,
    stream: u64,
) -> Result<Vec<f64>> {
    let mut rng = rng_for(model.seed, stream);
    let readout = if model.readout_noise > 0.0 {
        Some(
            Normal::new(0.0, model.readout_noise)
                .map_err(|e| Error::param("readout_noise", e.to_string()))?,
        )
    } else {
        None
    };
    expected
        .iter()
        .map(|&mu| {
            if !(mu >= 0.0 && mu.is_finite()) {
                return Err(Error::param(
                    "expected",
                    format!("intensities must be finite and >= 0, got {mu}"),
                ));
            }
            let lambda = model.quantum_efficiency * mu;
            let shot = if lambda > 0.0 {
                Poisson::new(lambda)
                    .map_err(|e| Error::param("expected", e.to_string()))?
                    .sample(&mut rng)
            } else {
                0.0
            };
            let noise = readout.map_or(0.0, |d| d.sample(&mut rng));
            Ok((shot + noise).max(0.0))
        })
        .collect()
}

/// How the perturbed curves are produced.
#[derive(Debug, Clone, PartialEq)]
pub enum PerturbationSource {
    /// Closed-form kernels evaluated at the given positions.
    Analytic { k: f64, x: Vec<f64> },
    /// Noiseless protocol scans on the configured grid and window.
    Simulated(TrajectoryConfig),
}

/// `M''` at time `z` and `M''_ε`, whose left factor is taken at `z − ε`.
///
/// The perturbed curve records `z − ε` as its time.
pub fn perturbed_mpp(
    endpoints: &Endpoints,
    potential: &Potential,
    z: f64,
    epsilon: f64,
    source: &PerturbationSource,
) -> Result<(MppCurve, MppCurve)> {
    endpoints.check_inside(z)?;
    let z_eps = z - epsilon;
    if !(z_eps > endpoints.z_a) {
        return Err(Error::param(
            "epsilon",
            format!("z - epsilon = {z_eps} must exceed z_a = {}", endpoints.z_a),
        ));
    }
    let floor = crate::pla::DEFAULT_MASK_FLOOR;
    match source {
        PerturbationSource::Analytic { k, x } => {
            let k = *k;
            let mut base = Vec::with_capacity(x.len());
            let mut pert = Vec::with_capacity(x.len());
            for &xi in x {
                let right = propagator(potential, endpoints.x_b, endpoints.z_b, xi, z, k)?;
                base.push(right * propagator(potential, xi, z, endpoints.x_a, endpoints.z_a, k)?);
                pert.push(
                    right * propagator(potential, xi, z_eps, endpoints.x_a, endpoints.z_a, k)?,
                );
            }
            Ok((
                MppCurve::from_product(x.clone(), &base, z, floor)?,
                MppCurve::from_product(x.clone(), &pert, z_eps, floor)?,
            ))
        }
        PerturbationSource::Simulated(cfg) => {
            let psi0 = gaussian_packet(&cfg.grid, cfg.waist, 0.0)?;
            let positions = cfg.scan_positions(endpoints)?;
            let scan = |axis, z_from, z_to, fixed_x| {
                let mut req = ScanRequest::noiseless(
                    axis,
                    *potential,
                    cfg.k,
                    z_from,
                    z_to,
                    fixed_x,
                    positions.clone(),
                );
                req.n_steps = cfg.n_steps;
                scan_propagator(&psi0, &req)
            };
            let left = scan(ScanAxis::FinalPosition, endpoints.z_a, z, endpoints.x_a)?;
            let left_eps = scan(ScanAxis::FinalPosition, endpoints.z_a, z_eps, endpoints.x_a)?;
            let right = scan(ScanAxis::InitialSlit, z, endpoints.z_b, endpoints.x_b)?;
            let m = build_mpp(&left, &right, floor)?;
            let product: Vec<Complex64> = left_eps
                .values
                .iter()
                .zip(&right.values)
                .map(|(l, r)| l * r)
                .collect();
            let m_eps = MppCurve::from_product(left.x.clone(), &product, z_eps, floor)?;
            Ok((m, m_eps))
        }
    }
}

/// `|M'' − M''_ε|` per sample (zero where either is masked).
pub fn deviation(m: &MppCurve, m_eps: &MppCurve) -> Vec<f64> {
    m.m.iter()
        .zip(&m_eps.m)
        .zip(m.retained.iter().zip(&m_eps.retained))
        .map(|((a, b), (&ra, &rb))| if ra && rb { (a - b).norm() } else { 0.0 })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidelityReport {
    /// `|∫_{-L/2}^{L/2} M''* M''_ε dx / L|²`.
    pub fidelity: f64,
    pub x_cl: f64,
    pub x_cl_eps: f64,
    pub x_cl_shift: f64,
    pub epsilon: f64,
    pub length: f64,
}

/// Trapezoidal overlap over `[-L/2, L/2]`, with the integrand linearly
/// interpolated at the interval ends.
fn overlap(m: &MppCurve, m_eps: &MppCurve, length: f64) -> Result<Complex64> {
    let (a, b) = (-0.5 * length, 0.5 * length);
    let x = &m.x;
    let n = x.len();
    let lo_err = || Error::SupportTooSmall {
        lo: x.first().copied().unwrap_or(f64::NAN),
        hi: x.last().copied().unwrap_or(f64::NAN),
        length,
    };
    if n < 2 || x[0] > a || x[n - 1] < b {
        return Err(lo_err());
    }
    let f = |i: usize| m.m[i].conj() * m_eps.m[i];
    let i0 = x.partition_point(|&v| v <= a) - 1;
    let i1 = x.partition_point(|&v| v < b).min(n - 1);
    if (i0..=i1).any(|i| !(m.retained[i] && m_eps.retained[i])) {
        return Err(lo_err());
    }
    let interp = |i: usize, t: f64| {
        let w = (t - x[i]) / (x[i + 1] - x[i]);
        f(i) * (1.0 - w) + f(i + 1) * w
    };
    // Nodes: a, x[i0+1..i1], b.
    let mut nodes: Vec<(f64, Complex64)> = vec![(a, interp(i0, a))];
    nodes.extend((i0 + 1..i1).map(|i| (x[i], f(i))));
    nodes.push((b, interp(i1 - 1, b)));
    Ok(nodes
        .windows(2)
        .map(|w| (w[0].1 + w[1].1) * (0.5 * (w[1].0 - w[0].0)))
        .sum())
}

/// Normalized overlap fidelity and the classical-position shift between the curves.
pub fn fidelity(m: &MppCurve, m_eps: &MppCurve, length: f64) -> Result<FidelityReport> {
    if !(length > 0.0) {
        return Err(Error::param("length", format!("must be > 0, got {length}")));
    }
    if m.x != m_eps.x {
        return Err(Error::GridMismatch(
            "fidelity curves are sampled at different positions".into(),
        ));
    }
    let integral = overlap(m, m_eps, length)?;
    let opts = FindOptions {
        refine: true,
        search: Some((-0.5 * length, 0.5 * length)),
        ..FindOptions::default()
    };
    let x_cl = find_classical_position(m, &opts)?.x_cl;
    let x_cl_eps = find_classical_position(m_eps, &opts)?.x_cl;
    Ok(FidelityReport {
        fidelity: (integral / length).norm_sqr().min(1.0),
        x_cl,
        x_cl_eps,
        x_cl_shift: (x_cl - x_cl_eps).abs(),
        epsilon: m.z - m_eps.z,
        length,
    })
}

/// `F(L)` for every length that the curves support.
pub fn fidelity_sweep(m: &MppCurve, m_eps: &MppCurve, lengths: &[f64]) -> Vec<FidelityReport> {
    lengths
        .iter()
        .filter_map(|&l| fidelity(m, m_eps, l).ok())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LengthCalibration {
    /// Sweep entries on either side of the target.
    pub bracket: (FidelityReport, FidelityReport),
    /// Report at the length reproducing the target.
    pub report: FidelityReport,
}

/// Finds the first bracket of `target` in the sweep and bisects for the
/// length that reproduces it.
pub fn calibrate_length(
    m: &MppCurve,
    m_eps: &MppCurve,
    target: f64,
    lengths: &[f64],
) -> Option<LengthCalibration> {
    let sweep = fidelity_sweep(m, m_eps, lengths);
    let pair = sweep
        .windows(2)
        .find(|w| (w[0].fidelity - target) * (w[1].fidelity - target) <= 0.0)?;
    let (mut lo, mut hi) = (pair[0], pair[1]);
    let bracket = (lo, hi);
    for _ in 0..200 {
        let mid = fidelity(m, m_eps, 0.5 * (lo.length + hi.length)).ok()?;
        if (mid.fidelity - target) * (lo.fidelity - target) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if (hi.length - lo.length).abs() < 1e-12 * hi.length.abs() {
            break;
        }
    }
    let report = if (lo.fidelity - target).abs() <= (hi.fidelity - target).abs() {
        lo
    } else {
        hi
    };
    Some(LengthCalibration { bracket, report })
}
