//! Direct-measurement protocol: slit coupling onto a two-level pointer,
//! two-branch evolution, pointer readout and reconstruction.
//!
//! Pointer convention: the coupling `exp(-iθ π_x σ_y)` rotates
//! `(c0, c1) -> (c0 cos θ + c1 sin θ, -c0 sin θ + c1 cos θ)`, so a full
//! `θ = π/2` coupling writes `-ψ(x_a)` onto `|1⟩`. With this handedness the
//! circular-basis difference is `⟨σ_y⟩ = P_R - P_L = -2 Im(c0* c1)` and the
//! readout `K'' = -⟨σ_x⟩ + i⟨σ_y⟩ = -2 c0* c1`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{EvolutionPlan, Evolver};
use crate::field::ComplexField;
use crate::grid::SpatialGrid;
use crate::noise::{sample_intensities, DetectorModel};
use crate::potential::Potential;

/// Reconstruction floor on `|ψ|`, relative to its peak.
pub const DEFAULT_DIVISION_FLOOR: f64 = 1e-6;

/// Smallest `|Φ(0)|² / ‖ψ‖²` accepted by [`measure_wavefunction`].
pub const ZERO_MOMENTUM_FLOOR: f64 = 1e-12;

/// Spatial state entangled with the pointer: `c0 |0⟩ + c1 |1⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    pub c0: ComplexField,
    pub c1: ComplexField,
}

impl JointState {
    pub fn new(c0: ComplexField, c1: ComplexField) -> Result<Self> {
        c0.grid().ensure_same(c1.grid())?;
        Ok(Self { c0, c1 })
    }

    /// `ψ |0⟩`.
    pub fn prepare(psi: &ComplexField) -> Self {
        Self {
            c0: psi.clone(),
            c1: ComplexField::zeros(*psi.grid()),
        }
    }

    pub fn grid(&self) -> &SpatialGrid {
        self.c0.grid()
    }

    pub fn norm2(&self) -> f64 {
        self.c0.norm2() + self.c1.norm2()
    }
}

fn slit_indices(grid: &SpatialGrid, x: f64, cells: usize) -> Result<(std::ops::Range<usize>, f64)> {
    if cells == 0 {
        return Err(Error::param("slit_cells", "must be at least 1"));
    }
    let centre = grid.nearest_index(x)?;
    let lo = centre.checked_sub((cells - 1) / 2).ok_or(Error::OffGrid {
        x,
        lo: grid.x_min(),
        hi: grid.x_max(),
    })?;
    let hi = lo + cells;
    if hi > grid.n() {
        return Err(Error::OffGrid {
            x,
            lo: grid.x_min(),
            hi: grid.x_max(),
        });
    }
    Ok((lo..hi, grid.x(centre)))
}

/// Result of a slit coupling: the new state and the grid position actually used.
#[derive(Debug, Clone, PartialEq)]
pub struct SlitCoupling {
    pub state: JointState,
    pub x_slit: f64,
}

/// Rotates the pointer by `θ` inside a one-cell slit at the sample nearest `x_a`.
pub fn apply_slit_coupling(state: &JointState, x_a: f64, theta: f64) -> Result<SlitCoupling> {
    apply_slit_coupling_cells(state, x_a, theta, 1)
}

/// As [`apply_slit_coupling`] with a slit `cells` samples wide.
pub fn apply_slit_coupling_cells(
    state: &JointState,
    x_a: f64,
    theta: f64,
    cells: usize,
) -> Result<SlitCoupling> {
    let (range, x_slit) = slit_indices(state.grid(), x_a, cells)?;
    let mut out = state.clone();
    let (s, c) = theta.sin_cos();
    for j in range {
        let a0 = state.c0.amps()[j];
        let a1 = state.c1.amps()[j];
        out.c0.amps_mut()[j] = a0 * c + a1 * s;
        out.c1.amps_mut()[j] = -a0 * s + a1 * c;
    }
    Ok(SlitCoupling { state: out, x_slit })
}

/// Merged output of the two-branch scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoBranchState {
    pub state: JointState,
    /// Snapped slit position (mm).
    pub x_slit: f64,
    /// `ψ(x_a, z_a)` at the slit.
    pub psi_slit: Complex64,
    /// Slit width (mm).
    pub slit_width: f64,
}

fn ensure_same_interval(a: &EvolutionPlan, b: &EvolutionPlan) -> Result<()> {
    let tol = 1e-12 * (a.z_start.abs() + a.z_end.abs()).max(1.0);
    if (a.z_start - b.z_start).abs() > tol || (a.z_end - b.z_end).abs() > tol || a.k != b.k {
        return Err(Error::param(
            "plan_ref",
            format!(
                "branches must share the interval and wavenumber: [{}, {}] k={} vs [{}, {}] k={}",
                a.z_start, a.z_end, a.k, b.z_start, b.z_end, b.k
            ),
        ));
    }
    Ok(())
}

/// Two-branch protocol: `(1/√2) T₂ψ |0⟩ − ψ(x_a) T₁|x_a⟩ |1⟩`.
///
/// The probe branch carries the slit-coupled `|1⟩` amplitude through the
/// measured potential (`plan_probe`); the reference branch carries the full
/// field through `plan_ref`, is rotated by `exp(iπσ_y/4)` and projected on `|0⟩`.
pub fn run_two_branch(
    psi0: &ComplexField,
    x_a: f64,
    plan_probe: &EvolutionPlan,
    plan_ref: &EvolutionPlan,
) -> Result<TwoBranchState> {
    run_two_branch_cells(psi0, x_a, plan_probe, plan_ref, 1)
}

pub fn run_two_branch_cells(
    psi0: &ComplexField,
    x_a: f64,
    plan_probe: &EvolutionPlan,
    plan_ref: &EvolutionPlan,
    cells: usize,
) -> Result<TwoBranchState> {
    ensure_same_interval(plan_probe, plan_ref)?;
    let grid = *psi0.grid();
    let coupled = apply_slit_coupling_cells(&JointState::prepare(psi0), x_a, PI / 2.0, cells)?;
    let psi_slit = psi0.amps()[grid.nearest_index(x_a)?];

    let probe = Evolver::new(grid, *plan_probe).evolve_quiet(&coupled.state.c1)?;
    let reference = Evolver::new(grid, *plan_ref).evolve(psi0)?;
    // exp(iπσ_y/4) maps (c0, 0) to ((c0)/√2, c0/√2); only |0⟩ is kept.
    let c0 = reference.scaled(Complex64::new(FRAC_1_SQRT_2, 0.0));
    Ok(TwoBranchState {
        state: JointState::new(c0, probe)?,
        x_slit: coupled.x_slit,
        psi_slit,
        slit_width: cells as f64 * grid.dx(),
    })
}

/// The four pointer-basis images plus the `|1⟩` projection.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BasisIntensities {
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
    pub right: Vec<f64>,
    pub left: Vec<f64>,
    pub one: Vec<f64>,
}

impl BasisIntensities {
    fn push(&mut self, c0: Complex64, c1: Complex64) {
        let i = Complex64::i();
        self.plus.push(0.5 * (c0 + c1).norm_sqr());
        self.minus.push(0.5 * (c0 - c1).norm_sqr());
        self.right.push(0.5 * (c0 + i * c1).norm_sqr());
        self.left.push(0.5 * (c0 - i * c1).norm_sqr());
        self.one.push(c1.norm_sqr());
    }

    pub fn len(&self) -> usize {
        self.plus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plus.is_empty()
    }

    /// Pointer expectations assembled from the images.
    pub fn readout(&self) -> PointerReadout {
        PointerReadout {
            sx: self
                .plus
                .iter()
                .zip(&self.minus)
                .map(|(p, m)| p - m)
                .collect(),
            sy: self
                .right
                .iter()
                .zip(&self.left)
                .map(|(r, l)| r - l)
                .collect(),
            p1: self.one.clone(),
        }
    }
}

pub fn basis_intensities(state: &JointState) -> BasisIntensities {
    let mut out = BasisIntensities::default();
    for (a, b) in state.c0.amps().iter().zip(state.c1.amps()) {
        out.push(*a, *b);
    }
    out
}

/// Unnormalized pointer expectations per post-selected position.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointerReadout {
    pub sx: Vec<f64>,
    pub sy: Vec<f64>,
    pub p1: Vec<f64>,
}

/// `⟨σ_x⟩ = 2 Re(c0* c1)`, `⟨σ_y⟩ = -2 Im(c0* c1)`, `⟨P₁⟩ = |c1|²` at every sample.
pub fn pointer_expectations(state: &JointState) -> PointerReadout {
    let n = state.grid().n();
    let mut out = PointerReadout {
        sx: Vec::with_capacity(n),
        sy: Vec::with_capacity(n),
        p1: Vec::with_capacity(n),
    };
    for (a, b) in state.c0.amps().iter().zip(state.c1.amps()) {
        let w = a.conj() * b;
        out.sx.push(2.0 * w.re);
        out.sy.push(-2.0 * w.im);
        out.p1.push(b.norm_sqr());
    }
    out
}

/// `K'' = -⟨σ_x⟩ + i⟨σ_y⟩` per sample.
pub fn readout_kpp(readout: &PointerReadout) -> Vec<Complex64> {
    readout
        .sx
        .iter()
        .zip(&readout.sy)
        .map(|(&sx, &sy)| Complex64::new(-sx, sy))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanAxis {
    /// One protocol run from a fixed slit; `K''(x_m, z_to; x_a, z_from)` read at every `x_m`.
    FinalPosition,
    /// One run per slit position `x`; `K''(x_b, z_to; x, z_from)` read at a fixed `x_b`.
    InitialSlit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanMetadata {
    /// Snapped fixed endpoint: the slit `x_a` or the detection point `x_b` (mm).
    pub fixed_x: f64,
    pub z_from: f64,
    pub z_to: f64,
    pub potential: Potential,
    pub slit_width: f64,
    /// Positions removed during reconstruction because `|ψ|` fell below the floor.
    pub dropped: Vec<f64>,
}

/// Samples of `K''` (or of a reconstructed `K`) along one scan axis.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagatorScan {
    pub axis: ScanAxis,
    pub x: Vec<f64>,
    pub values: Vec<Complex64>,
    pub meta: ScanMetadata,
}

impl PropagatorScan {
    pub fn new(
        axis: ScanAxis,
        x: Vec<f64>,
        values: Vec<Complex64>,
        meta: ScanMetadata,
    ) -> Result<Self> {
        if x.len() != values.len() {
            return Err(Error::param(
                "values",
                format!("{} positions but {} values", x.len(), values.len()),
            ));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param(
                "x",
                "scan positions must be strictly increasing",
            ));
        }
        Ok(Self {
            axis,
            x,
            values,
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * c).collect(),
            ..self.clone()
        }
    }
}

/// Inputs of one scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRequest {
    pub axis: ScanAxis,
    pub potential: Potential,
    /// Effective mass (mm⁻¹).
    pub k: f64,
    pub z_from: f64,
    pub z_to: f64,
    /// Slit position (final-position scans) or detection position (initial-slit scans).
    pub fixed_x: f64,
    /// Read-out positions (final-position scans) or slit positions (initial-slit scans).
    pub positions: Vec<f64>,
    /// Step count for the probe branch; the default policy applies when `None`.
    pub n_steps: Option<usize>,
    pub slit_cells: usize,
    /// Detector model for noisy scans; `None` reads exact expectations.
    pub detector: Option<DetectorModel>,
    /// Random stream index used for detector noise.
    pub noise_stream: u64,
}

impl ScanRequest {
    pub fn noiseless(
        axis: ScanAxis,
        potential: Potential,
        k: f64,
        z_from: f64,
        z_to: f64,
        fixed_x: f64,
        positions: Vec<f64>,
    ) -> Self {
        Self {
            axis,
            potential,
            k,
            z_from,
            z_to,
            fixed_x,
            positions,
            n_steps: None,
            slit_cells: 1,
            detector: None,
            noise_stream: 0,
        }
    }

    fn plans(&self) -> Result<(EvolutionPlan, EvolutionPlan)> {
        let probe = match self.n_steps {
            Some(n) => EvolutionPlan::new(self.potential, self.z_from, self.z_to, n, self.k)?,
            None => {
                EvolutionPlan::with_default_steps(self.potential, self.z_from, self.z_to, self.k)?
            }
        };
        let reference = EvolutionPlan::new(Potential::Free, self.z_from, self.z_to, 1, self.k)?;
        Ok((probe, reference))
    }
}

fn snapped_indices(grid: &SpatialGrid, positions: &[f64]) -> Result<Vec<usize>> {
    let idx: Vec<usize> = positions
        .iter()
        .map(|&x| grid.nearest_index(x))
        .collect::<Result<_>>()?;
    if idx.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param(
            "positions",
            "scan positions must be strictly increasing after snapping to the grid",
        ));
    }
    Ok(idx)
}

/// Turns exact `(c0, c1)` pairs into `K''`, optionally through the detector.
fn read_pairs(pairs: &[(Complex64, Complex64)], req: &ScanRequest) -> Result<Vec<Complex64>> {
    let Some(model) = &req.detector else {
        return Ok(pairs.iter().map(|(a, b)| -2.0 * a.conj() * b).collect());
    };
    let mut ideal = BasisIntensities::default();
    for &(a, b) in pairs {
        ideal.push(a, b);
    }
    let total: f64 = [&ideal.plus, &ideal.minus, &ideal.right, &ideal.left]
        .iter()
        .flat_map(|v| v.iter())
        .sum();
    if !(total > 0.0) {
        return Ok(vec![Complex64::new(0.0, 0.0); pairs.len()]);
    }
    let scale = model.photons_per_scan / total;
    let images = [&ideal.plus, &ideal.minus, &ideal.right, &ideal.left];
    let mut noisy: Vec<Vec<f64>> = Vec::with_capacity(4);
    for (b, image) in images.into_iter().enumerate() {
        let expected: Vec<f64> = image.iter().map(|v| v * scale).collect();
        let stream = req.noise_stream.wrapping_mul(4).wrapping_add(b as u64);
        let counts = sample_intensities(&expected, model, stream)?;
        noisy.push(
            counts
                .into_iter()
                .map(|c| c / (model.quantum_efficiency * scale))
                .collect(),
        );
    }
    let [plus, minus, right, left]: [Vec<f64>; 4] =
        noisy.try_into().expect("exactly four basis images");
    let readout = BasisIntensities {
        plus,
        minus,
        right,
        left,
        one: Vec::new(),
    }
    .readout();
    Ok(readout_kpp(&readout))
}

/// Runs the protocol along one scan axis and returns the raw `K''` samples.
pub fn scan_propagator(psi0: &ComplexField, req: &ScanRequest) -> Result<PropagatorScan> {
    let grid = *psi0.grid();
    let (plan_probe, plan_ref) = req.plans()?;
    let idx = snapped_indices(&grid, &req.positions)?;
    let x: Vec<f64> = idx.iter().map(|&j| grid.x(j)).collect();
    let fixed = grid.nearest_index(req.fixed_x)?;
    let slit_width = req.slit_cells as f64 * grid.dx();
    let meta = ScanMetadata {
        fixed_x: grid.x(fixed),
        z_from: req.z_from,
        z_to: req.z_to,
        potential: req.potential,
        slit_width,
        dropped: Vec::new(),
    };
    if idx.is_empty() {
        return PropagatorScan::new(req.axis, x, Vec::new(), meta);
    }

    let pairs: Vec<(Complex64, Complex64)> = match req.axis {
        ScanAxis::FinalPosition => {
            let run =
                run_two_branch_cells(psi0, req.fixed_x, &plan_probe, &plan_ref, req.slit_cells)?;
            idx.iter()
                .map(|&j| (run.state.c0.amps()[j], run.state.c1.amps()[j]))
                .collect()
        }
        ScanAxis::InitialSlit => {
            // The reference branch does not depend on the slit; evolve it once.
            let reference = Evolver::new(grid, plan_ref).evolve(psi0)?;
            let c0 = reference.amps()[fixed] * FRAC_1_SQRT_2;
            let probe = Evolver::new(grid, plan_probe);
            let prepared = JointState::prepare(psi0);
            idx.par_iter()
                .map(|&j| {
                    let coupled =
                        apply_slit_coupling_cells(&prepared, grid.x(j), PI / 2.0, req.slit_cells)?;
                    let mut c1 = coupled.state.c1.into_amps();
                    probe.evolve_in_place(&mut c1)?;
                    Ok((c0, c1[fixed]))
                })
                .collect::<Result<_>>()?
        }
    };
    let values = read_pairs(&pairs, req)?;
    PropagatorScan::new(req.axis, x, values, meta)
}

/// Inverts the readout: `K = -K'' / (√2 ψ* ψ_fixed w)`, with `w` the slit width.
///
/// For a final-position scan `psi` supplies `ψ(x_m)` (conjugated) and
/// `psi_fixed` is the slit amplitude `ψ(x_a)`. For an initial-slit scan
/// `psi` supplies the slit amplitude `ψ(x)` and `psi_fixed` is the reference
/// wave at the detection point `x_b` (conjugated). Samples where `|ψ|` falls
/// below `floor` times its peak are dropped and recorded in the metadata.
pub fn reconstruct_propagator(
    kpp: &PropagatorScan,
    psi: &ComplexField,
    psi_fixed: Complex64,
    floor: f64,
) -> Result<PropagatorScan> {
    let peak = psi.max_abs();
    let grid = psi.grid();
    let mut x = Vec::with_capacity(kpp.len());
    let mut values = Vec::with_capacity(kpp.len());
    let mut meta = kpp.meta.clone();
    for (&xm, &v) in kpp.x.iter().zip(&kpp.values) {
        let p = psi.amps()[grid.nearest_index(xm)?];
        if p.norm() < floor * peak || peak == 0.0 {
            meta.dropped.push(xm);
            continue;
        }
        let denom = match kpp.axis {
            ScanAxis::FinalPosition => p.conj() * psi_fixed,
            ScanAxis::InitialSlit => psi_fixed.conj() * p,
        } * (2f64.sqrt() * kpp.meta.slit_width);
        if denom.norm() == 0.0 {
            meta.dropped.push(xm);
            continue;
        }
        x.push(xm);
        values.push(-v / denom);
    }
    if x.is_empty() && !kpp.is_empty() {
        return Err(Error::DivisionFloor);
    }
    PropagatorScan::new(kpp.axis, x, values, meta)
}

/// Relative L² deviation between the freely evolved reference `T₂ψ` at
/// `z_to` and the stationary `ψ(x, z_from)`, over the samples where
/// `|ψ| > threshold · peak`.
pub fn reference_drift(
    psi0: &ComplexField,
    z_from: f64,
    z_to: f64,
    k: f64,
    threshold: f64,
) -> Result<f64> {
    let plan = EvolutionPlan::new(Potential::Free, z_from, z_to, 1, k)?;
    let evolved = Evolver::new(*psi0.grid(), plan).evolve(psi0)?;
    let peak = psi0.max_abs();
    let (mut num, mut den) = (0.0, 0.0);
    for (a, b) in psi0.amps().iter().zip(evolved.amps()) {
        if a.norm() > threshold * peak {
            num += (a - b).norm_sqr();
            den += a.norm_sqr();
        }
    }
    Ok((num / den).sqrt())
}

/// Reconstructed wavefunction and the intermediate quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct WavefunctionMeasurement {
    pub psi: ComplexField,
    /// Zero-momentum amplitude `Φ(0) = ⟨p₀|ψ⟩`.
    pub phi0: Complex64,
    pub readout: PointerReadout,
}

/// Direct wavefunction measurement with a zero-momentum slit.
///
/// The pointer is rotated by `π/2` on the zero-momentum component
/// `|p₀⟩⟨p₀|ψ⟩` (the discrete `p₀` mode is the uniform field), the spatial
/// state is post-selected at every `x`, and
/// `ψ(x) = -(½[⟨σ_x⟩ + i⟨σ_y⟩] - ⟨P₁⟩) / (Φ* p₀(x))`.
pub fn measure_wavefunction(psi0: &ComplexField) -> Result<WavefunctionMeasurement> {
    let grid = *psi0.grid();
    let norm = psi0.norm2();
    if !(norm > 0.0) {
        return Err(Error::VanishingZeroMomentum { ratio: 0.0 });
    }
    let u = 1.0 / (grid.n() as f64 * grid.dx()).sqrt();
    let phi0 = psi0.amps().iter().sum::<Complex64>() * u * grid.dx();
    let ratio = phi0.norm_sqr() / norm;
    if ratio < ZERO_MOMENTUM_FLOOR {
        return Err(Error::VanishingZeroMomentum { ratio });
    }
    let projected = phi0 * u;
    let c0 = ComplexField::new(grid, psi0.amps().iter().map(|a| a - projected).collect())?;
    let c1 = ComplexField::new(grid, vec![-projected; grid.n()])?;
    let readout = pointer_expectations(&JointState::new(c0, c1)?);
    let denom = phi0.conj() * u;
    let amps = readout
        .sx
        .iter()
        .zip(&readout.sy)
        .zip(&readout.p1)
        .map(|((&sx, &sy), &p1)| -(0.5 * Complex64::new(sx, sy) - p1) / denom)
        .collect();
    Ok(WavefunctionMeasurement {
        psi: ComplexField::new(grid, amps)?,
        phi0,
        readout,
    })
}
