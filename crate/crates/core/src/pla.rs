//! Classical trajectories from the stationary point of propagator products.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::gaussian_packet;
use crate::grid::SpatialGrid;
use crate::noise::DetectorModel;
use crate::potential::Potential;
use crate::propagators::Endpoints;
use crate::protocol::{scan_propagator, PropagatorScan, ScanAxis, ScanRequest};

/// Mask floor on `|Π''|`, relative to its maximum.
pub const DEFAULT_MASK_FLOOR: f64 = 1e-8;

/// Default moving-average window (samples).
pub const DEFAULT_SMOOTHING_WINDOW: usize = 5;

/// Default half-width of the scanned window around the endpoints' midpoint (samples).
pub const DEFAULT_SCAN_HALF_WIDTH: usize = 26;

/// Overlap ratio `|Σ m* r| / (‖m‖ ‖r‖)` below which an alignment is flagged.
pub const ALIGNMENT_CONDITION_FLOOR: f64 = 1e-6;

/// Unit-modulus product `M''(x) = Π''(x)/|Π''(x)|` at one intermediate time.
#[derive(Debug, Clone, PartialEq)]
pub struct MppCurve {
    pub x: Vec<f64>,
    /// Unit-modulus samples; masked samples hold zero.
    pub m: Vec<Complex64>,
    pub retained: Vec<bool>,
    pub z: f64,
}

impl MppCurve {
    /// Normalizes arbitrary product samples, masking those below `floor` times the largest modulus.
    pub fn from_product(x: Vec<f64>, product: &[Complex64], z: f64, floor: f64) -> Result<Self> {
        if x.len() != product.len() {
            return Err(Error::GridMismatch(format!(
                "{} positions but {} product samples",
                x.len(),
                product.len()
            )));
        }
        let max = product.iter().map(|p| p.norm()).fold(0.0, f64::max);
        let mut m = Vec::with_capacity(x.len());
        let mut retained = Vec::with_capacity(x.len());
        for p in product {
            let a = p.norm();
            if a > 0.0 && a.is_finite() && a >= floor * max {
                m.push(p / a);
                retained.push(true);
            } else {
                m.push(Complex64::new(0.0, 0.0));
                retained.push(false);
            }
        }
        Ok(Self { x, m, retained, z })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn retained_count(&self) -> usize {
        self.retained.iter().filter(|&&r| r).count()
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            m: self.m.iter().map(|v| v * c).collect(),
            ..self.clone()
        }
    }

    /// Maximal runs `[start, end)` of consecutive retained samples.
    fn runs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut start = None;
        for (i, &r) in self.retained.iter().enumerate() {
            match (r, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    out.push((s, i));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            out.push((s, self.retained.len()));
        }
        out
    }
}

fn same_positions(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(p, q)| (p - q).abs() <= 1e-12 * p.abs().max(1.0))
}

/// `M''` from a final-position scan `K''(x, z; x_a, z_a)` and an initial-slit
/// scan `K''(x_b, z_b; x, z)` taken at the same positions.
pub fn build_mpp(
    scan_left: &PropagatorScan,
    scan_right: &PropagatorScan,
    floor: f64,
) -> Result<MppCurve> {
    if !same_positions(&scan_left.x, &scan_right.x) {
        return Err(Error::GridMismatch(
            "left and right scans are sampled at different positions".into(),
        ));
    }
    let z = scan_left.meta.z_to;
    if (scan_right.meta.z_from - z).abs() > 1e-9 * z.abs().max(1.0) {
        return Err(Error::param(
            "scan_right",
            format!(
                "intermediate times differ: left ends at {z}, right starts at {}",
                scan_right.meta.z_from
            ),
        ));
    }
    let product: Vec<Complex64> = scan_left
        .values
        .iter()
        .zip(&scan_right.values)
        .map(|(l, r)| l * r)
        .collect();
    MppCurve::from_product(scan_left.x.clone(), &product, z, floor)
}

/// Least-squares global phase between two sample sets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseAlignment {
    /// Phase to multiply the measured samples by (rad).
    pub delta: f64,
    /// `|Σ m* r| / (‖m‖ ‖r‖)`; near zero when the curves are orthogonal.
    pub conditioning: f64,
    pub ill_conditioned: bool,
    pub samples: usize,
}

impl PhaseAlignment {
    pub fn factor(&self) -> Complex64 {
        Complex64::from_polar(1.0, self.delta)
    }
}

/// Phase `δ` maximizing `Re Σ conj(r) m e^{iδ}`, i.e. `δ = arg Σ conj(m) r`.
pub fn align_global_phase(
    measured: &[Complex64],
    reference: &[Complex64],
) -> Result<PhaseAlignment> {
    if measured.len() != reference.len() {
        return Err(Error::NoOverlap(format!(
            "{} measured vs {} reference samples",
            measured.len(),
            reference.len()
        )));
    }
    if measured.len() < 3 {
        return Err(Error::NoOverlap(format!(
            "need at least 3 overlapping samples, have {}",
            measured.len()
        )));
    }
    let c: Complex64 = measured
        .iter()
        .zip(reference)
        .map(|(m, r)| m.conj() * r)
        .sum();
    let nm = measured.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let nr = reference.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let conditioning = if nm > 0.0 && nr > 0.0 {
        c.norm() / (nm * nr)
    } else {
        0.0
    };
    Ok(PhaseAlignment {
        delta: c.arg(),
        conditioning,
        ill_conditioned: conditioning < ALIGNMENT_CONDITION_FLOOR,
        samples: measured.len(),
    })
}

/// Aligns `measured` onto `reference` over their common retained samples.
pub fn align_curves(
    measured: &MppCurve,
    reference: &MppCurve,
) -> Result<(MppCurve, PhaseAlignment)> {
    if !same_positions(&measured.x, &reference.x) {
        return Err(Error::NoOverlap(
            "curves are sampled at different positions".into(),
        ));
    }
    let (m, r): (Vec<Complex64>, Vec<Complex64>) = (0..measured.len())
        .filter(|&i| measured.retained[i] && reference.retained[i])
        .map(|i| (measured.m[i], reference.m[i]))
        .unzip();
    let alignment = align_global_phase(&m, &r)?;
    Ok((measured.scaled(alignment.factor()), alignment))
}

/// Aligns a scan onto reference values given at the scan positions.
pub fn align_scan(
    measured: &PropagatorScan,
    reference: &[Complex64],
) -> Result<(PropagatorScan, PhaseAlignment)> {
    let alignment = align_global_phase(&measured.values, reference)?;
    Ok((measured.scaled(alignment.factor()), alignment))
}

/// Single-sample alignment with `β = atan2(Re, Im)`: returns `β_m − β_t`,
/// the phase that rotates `measured` onto `reference`.
pub fn single_point_alignment(measured: Complex64, reference: Complex64) -> f64 {
    let beta = |v: Complex64| v.re.atan2(v.im);
    beta(measured) - beta(reference)
}

/// Centred boxcar average of Re and Im, renormalized to unit modulus.
///
/// Near the ends and next to masked samples the window shrinks symmetrically
/// so that it never straddles a gap.
pub fn moving_average(curve: &MppCurve, window: usize) -> Result<MppCurve> {
    let n = curve.len();
    let max = (n / 4).max(1);
    if window == 0 || window.is_multiple_of(2) || window > max {
        return Err(Error::InvalidWindow { window, max });
    }
    let half = window / 2;
    let mut out = curve.clone();
    for (start, end) in curve.runs() {
        for i in start..end {
            let h = half.min(i - start).min(end - 1 - i);
            let sum: Complex64 = curve.m[i - h..=i + h].iter().sum();
            let a = sum.norm();
            if a > 0.0 {
                out.m[i] = sum / a;
            }
        }
    }
    Ok(out)
}

/// Five-point central difference `[-f(x+2h) + 8f(x+h) - 8f(x-h) + f(x-2h)] / 12h`.
///
/// The output has `len - 4` entries, aligned with input samples `2..len-2`.
pub fn richardson_derivative<T>(f: &[T], h: f64) -> Result<Vec<T>>
where
    T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
{
    if f.len() < 5 {
        return Err(Error::InsufficientSamples {
            needed: 5,
            available: f.len(),
        });
    }
    if !(h > 0.0) {
        return Err(Error::param("h", format!("step must be > 0, got {h}")));
    }
    let s = 1.0 / (12.0 * h);
    Ok(f.windows(5)
        .map(|w| ((w[4] * -1.0 + w[3] * 8.0) - w[1] * 8.0 + w[0]) * s)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FindOptions {
    /// Moving-average window (odd).
    pub window: usize,
    /// Parabolic sub-sample refinement of the argmin.
    pub refine: bool,
    /// Restricts the argmin to `[lo, hi]` (mm).
    pub search: Option<(f64, f64)>,
}

impl Default for FindOptions {
    fn default() -> Self {
        Self {
            window: DEFAULT_SMOOTHING_WINDOW,
            refine: false,
            search: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalPosition {
    pub x_cl: f64,
    /// `|∂ₓ Re M''|² + |∂ₓ Im M''|²` at the selected sample.
    pub residual: f64,
    pub index: usize,
    /// The minimum sits on the edge of the searchable region, so it may not be interior.
    pub at_boundary: bool,
}

/// Locates the stationary point of `M''` as the argmin of `|∂ₓ M''|²`.
pub fn find_classical_position(curve: &MppCurve, opts: &FindOptions) -> Result<ClassicalPosition> {
    let runs = curve.runs();
    let longest = runs.iter().map(|(s, e)| e - s).max().unwrap_or(0);
    if longest < 9 {
        return Err(Error::InsufficientSamples {
            needed: 9,
            available: longest,
        });
    }
    let smooth = moving_average(curve, opts.window)?;
    // g(x) on the interior of every run long enough to differentiate.
    let mut g = vec![f64::NAN; curve.len()];
    for &(s, e) in &runs {
        if e - s < 5 {
            continue;
        }
        let h = (curve.x[e - 1] - curve.x[s]) / (e - s - 1) as f64;
        let uniform = curve.x[s..e]
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-6 * h);
        if !uniform {
            return Err(Error::param("curve", "positions must be uniformly spaced"));
        }
        let d = richardson_derivative(&smooth.m[s..e], h)?;
        for (offset, v) in d.iter().enumerate() {
            g[s + 2 + offset] = v.norm_sqr();
        }
    }
    let (lo, hi) = opts.search.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let candidates: Vec<usize> = (0..curve.len())
        .filter(|&i| !g[i].is_nan() && curve.x[i] >= lo && curve.x[i] <= hi)
        .collect();
    let (first, last) = match (candidates.first(), candidates.last()) {
        (Some(&f), Some(&l)) => (f, l),
        _ => {
            return Err(Error::InsufficientSamples {
                needed: 1,
                available: 0,
            })
        }
    };
    let centre = match opts.search {
        Some((a, b)) => 0.5 * (a + b),
        None => 0.5 * (curve.x[0] + curve.x[curve.len() - 1]),
    };
    let mut best = first;
    for &i in &candidates {
        let better = g[i] < g[best]
            || (g[i] == g[best] && (curve.x[i] - centre).abs() < (curve.x[best] - centre).abs());
        if better {
            best = i;
        }
    }
    let mut x_cl = curve.x[best];
    let at_boundary = best == first || best == last;
    if opts.refine && !at_boundary && !g[best - 1].is_nan() && !g[best + 1].is_nan() {
        let (gm, g0, gp) = (g[best - 1], g[best], g[best + 1]);
        let curvature = gp - 2.0 * g0 + gm;
        if curvature > 0.0 {
            let h = curve.x[best + 1] - curve.x[best];
            let shift = (0.5 * (gm - gp) / curvature).clamp(-0.5, 0.5);
            x_cl += shift * h;
        }
    }
    Ok(ClassicalPosition {
        x_cl,
        residual: g[best],
        index: best,
        at_boundary,
    })
}

/// Settings for [`extract_trajectory`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryConfig {
    pub grid: SpatialGrid,
    /// Effective mass (mm⁻¹).
    pub k: f64,
    /// Waist of the prepared Gaussian mode (mm).
    pub waist: f64,
    /// Samples scanned on each side of the endpoints' midpoint.
    pub half_width: usize,
    pub mask_floor: f64,
    pub find: FindOptions,
    /// Probe-branch step count; default policy when `None`.
    pub n_steps: Option<usize>,
    pub detector: Option<DetectorModel>,
}

impl TrajectoryConfig {
    pub fn new(grid: SpatialGrid, k: f64, waist: f64) -> Self {
        Self {
            grid,
            k,
            waist,
            half_width: DEFAULT_SCAN_HALF_WIDTH,
            mask_floor: DEFAULT_MASK_FLOOR,
            find: FindOptions::default(),
            n_steps: None,
            detector: None,
        }
    }

    /// Scan positions: `half_width` samples either side of the snapped midpoint.
    pub fn scan_positions(&self, endpoints: &Endpoints) -> Result<Vec<f64>> {
        let centre = self
            .grid
            .nearest_index(0.5 * (endpoints.x_a + endpoints.x_b))?;
        if centre < self.half_width || centre + self.half_width >= self.grid.n() {
            return Err(Error::OffGrid {
                x: 0.5 * (endpoints.x_a + endpoints.x_b),
                lo: self.grid.x(self.half_width.min(self.grid.n() - 1)),
                hi: self
                    .grid
                    .x(self.grid.n().saturating_sub(self.half_width + 1)),
            });
        }
        Ok((centre - self.half_width..=centre + self.half_width)
            .map(|j| self.grid.x(j))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub z: f64,
    pub x_cl: f64,
    pub residual: f64,
    pub curve: MppCurve,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryFailure {
    pub z: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEstimate {
    pub endpoints: Endpoints,
    pub potential: Potential,
    /// Successful extractions, ordered by `z`.
    pub points: Vec<TrajectoryPoint>,
    pub failures: Vec<TrajectoryFailure>,
}

impl TrajectoryEstimate {
    pub fn success_fraction(&self) -> f64 {
        let total = self.points.len() + self.failures.len();
        if total == 0 {
            0.0
        } else {
            self.points.len() as f64 / total as f64
        }
    }
}

/// Both protocol scans through the intermediate slice at `z`.
pub fn scan_pair(
    endpoints: &Endpoints,
    potential: &Potential,
    z: f64,
    cfg: &TrajectoryConfig,
    noise_stream: u64,
) -> Result<(PropagatorScan, PropagatorScan)> {
    endpoints.check_inside(z)?;
    let psi0 = gaussian_packet(&cfg.grid, cfg.waist, 0.0)?;
    let positions = cfg.scan_positions(endpoints)?;
    let mut left = ScanRequest::noiseless(
        ScanAxis::FinalPosition,
        *potential,
        cfg.k,
        endpoints.z_a,
        z,
        endpoints.x_a,
        positions.clone(),
    );
    left.n_steps = cfg.n_steps;
    left.detector = cfg.detector;
    left.noise_stream = 2 * noise_stream;
    let mut right = ScanRequest::noiseless(
        ScanAxis::InitialSlit,
        *potential,
        cfg.k,
        z,
        endpoints.z_b,
        endpoints.x_b,
        positions,
    );
    right.n_steps = cfg.n_steps;
    right.detector = cfg.detector;
    right.noise_stream = 2 * noise_stream + 1;
    Ok((
        scan_propagator(&psi0, &left)?,
        scan_propagator(&psi0, &right)?,
    ))
}

/// Classical position at a single intermediate time.
pub fn extract_point(
    endpoints: &Endpoints,
    potential: &Potential,
    z: f64,
    cfg: &TrajectoryConfig,
    noise_stream: u64,
) -> Result<TrajectoryPoint> {
    let (left, right) = scan_pair(endpoints, potential, z, cfg, noise_stream)?;
    let curve = build_mpp(&left, &right, cfg.mask_floor)?;
    let found = find_classical_position(&curve, &cfg.find)?;
    if found.at_boundary {
        return Err(Error::param(
            "scan window",
            format!(
                "minimum at the window edge (x = {:.6} mm); widen the scan",
                found.x_cl
            ),
        ));
    }
    Ok(TrajectoryPoint {
        z,
        x_cl: found.x_cl,
        residual: found.residual,
        curve,
    })
}

/// Runs both scans and the stationary-point search for every `z`; failures
/// at individual `z` are recorded rather than aborting the whole trajectory.
pub fn extract_trajectory(
    endpoints: &Endpoints,
    potential: &Potential,
    z_list: &[f64],
    cfg: &TrajectoryConfig,
) -> Result<TrajectoryEstimate> {
    if z_list.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::param(
            "z_list",
            "intermediate times must be strictly increasing",
        ));
    }
    let results: Vec<(f64, Result<TrajectoryPoint>)> = z_list
        .par_iter()
        .enumerate()
        .map(|(i, &z)| (z, extract_point(endpoints, potential, z, cfg, i as u64)))
        .collect();
    let mut points = Vec::new();
    let mut failures = Vec::new();
    for (z, r) in results {
        match r {
            Ok(p) => points.push(p),
            Err(e) => {
                log::warn!("no classical position at z = {z} mm: {e}");
                failures.push(TrajectoryFailure {
                    z,
                    reason: e.to_string(),
                });
            }
        }
    }
    Ok(TrajectoryEstimate {
        endpoints: *endpoints,
        potential: *potential,
        points,
        failures,
    })
}
