//! Split-step spectral integration of `i ∂_z ψ = -(1/2k) ∂²_x ψ + V(x) ψ`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::grid::SpatialGrid;
use crate::potential::Potential;

/// Harmonic steps per half period used by [`EvolutionPlan::with_default_steps`].
///
/// Strang splitting at this resolution keeps propagator-matrix entries within
/// 1e-3 of the analytic Mehler kernel over the central stationary-phase region.
pub const HARMONIC_STEPS_PER_HALF_PERIOD: f64 = 160.0;

/// Largest grid for which [`propagator_matrix`] will run.
pub const MAX_MATRIX_N: usize = 2048;

/// Boundary amplitude, relative to the peak, above which a warning fires.
pub const BOUNDARY_WARN_RATIO: f64 = 1e-8;

/// Spectral power fraction in the outer quarter of the band that triggers an aliasing warning.
pub const SPECTRAL_TAIL_WARN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolutionPlan {
    pub potential: Potential,
    pub z_start: f64,
    pub z_end: f64,
    pub n_steps: usize,
    /// Effective mass, the propagation wavenumber (mm⁻¹).
    pub k: f64,
}

impl EvolutionPlan {
    pub fn new(
        potential: Potential,
        z_start: f64,
        z_end: f64,
        n_steps: usize,
        k: f64,
    ) -> Result<Self> {
        if !(z_end > z_start) || !z_start.is_finite() || !z_end.is_finite() {
            return Err(Error::InvalidInterval { z_start, z_end });
        }
        if n_steps == 0 {
            return Err(Error::param("n_steps", "must be at least 1"));
        }
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::param("k", format!("must be > 0, got {k}")));
        }
        Ok(Self {
            potential,
            z_start,
            z_end,
            n_steps,
            k,
        })
    }

    /// One step in free space (exact), otherwise
    /// `ceil(HARMONIC_STEPS_PER_HALF_PERIOD · ω Δz / π)` steps.
    pub fn with_default_steps(
        potential: Potential,
        z_start: f64,
        z_end: f64,
        k: f64,
    ) -> Result<Self> {
        Self::new(
            potential,
            z_start,
            z_end,
            default_steps(&potential, z_end - z_start),
            k,
        )
    }

    pub fn dz(&self) -> f64 {
        (self.z_end - self.z_start) / self.n_steps as f64
    }

    pub fn duration(&self) -> f64 {
        self.z_end - self.z_start
    }
}

pub fn default_steps(potential: &Potential, duration: f64) -> usize {
    match *potential {
        Potential::Free => 1,
        Potential::Harmonic { omega } => {
            // The small offset keeps exact multiples from rounding up an extra step.
            ((HARMONIC_STEPS_PER_HALF_PERIOD * omega * duration.abs() / PI - 1e-9).ceil() as usize)
                .max(1)
        }
    }
}

/// Precomputed transforms and phase factors for repeated evolution on one
/// grid. Shareable across threads; each call allocates its own scratch.
pub struct Evolver {
    grid: SpatialGrid,
    plan: EvolutionPlan,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    kinetic: Vec<Complex64>,
    half_potential: Option<Vec<Complex64>>,
    full_potential: Option<Vec<Complex64>>,
}

impl Evolver {
    pub fn new(grid: SpatialGrid, plan: EvolutionPlan) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.n());
        let inverse = planner.plan_fft_inverse(grid.n());
        let dz = plan.dz();
        let inv_n = 1.0 / grid.n() as f64;
        // The inverse-transform normalization is folded into the kinetic factor.
        let kinetic = grid
            .wavenumbers()
            .iter()
            .map(|&q| Complex64::from_polar(inv_n, -q * q * dz / (2.0 * plan.k)))
            .collect();
        let potential_phase = |fraction: f64| -> Option<Vec<Complex64>> {
            match plan.potential {
                Potential::Free => None,
                p => Some(
                    grid.xs()
                        .iter()
                        .map(|&x| Complex64::from_polar(1.0, -p.value(x, plan.k) * dz * fraction))
                        .collect(),
                ),
            }
        };
        Self {
            grid,
            plan,
            forward,
            inverse,
            kinetic,
            half_potential: potential_phase(0.5),
            full_potential: potential_phase(1.0),
        }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn plan(&self) -> &EvolutionPlan {
        &self.plan
    }

    fn kinetic_step(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.forward.process_with_scratch(buf, scratch);
        for (a, f) in buf.iter_mut().zip(&self.kinetic) {
            *a *= f;
        }
        self.inverse.process_with_scratch(buf, scratch);
    }

    /// Strang splitting with adjacent potential half-steps merged.
    pub fn evolve_in_place(&self, buf: &mut [Complex64]) -> Result<()> {
        if buf.len() != self.grid.n() {
            return Err(Error::GridMismatch(format!(
                "buffer of {} samples for a grid of {}",
                buf.len(),
                self.grid.n()
            )));
        }
        let len = self
            .forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len());
        let mut scratch = vec![Complex64::new(0.0, 0.0); len];
        let apply = |buf: &mut [Complex64], phase: &Option<Vec<Complex64>>| {
            if let Some(p) = phase {
                for (a, f) in buf.iter_mut().zip(p) {
                    *a *= f;
                }
            }
        };
        apply(buf, &self.half_potential);
        for step in 0..self.plan.n_steps {
            self.kinetic_step(buf, &mut scratch);
            if step + 1 < self.plan.n_steps {
                apply(buf, &self.full_potential);
            }
        }
        apply(buf, &self.half_potential);
        Ok(())
    }

    /// Evolves without boundary or aliasing diagnostics (used for deltas,
    /// whose spectrum is flat by construction).
    pub fn evolve_quiet(&self, field: &ComplexField) -> Result<ComplexField> {
        self.grid.ensure_same(field.grid())?;
        let mut amps = field.amps().to_vec();
        self.evolve_in_place(&mut amps)?;
        ComplexField::new(self.grid, amps)
    }

    pub fn evolve(&self, field: &ComplexField) -> Result<ComplexField> {
        let before = diagnose(field);
        if before.spectral_tail > SPECTRAL_TAIL_WARN {
            log::warn!(
                "input spectrum carries {:.2e} of its power in the outer quarter band; evolution may alias",
                before.spectral_tail
            );
        }
        let out = self.evolve_quiet(field)?;
        let after = diagnose(&out);
        if after.boundary_ratio > BOUNDARY_WARN_RATIO {
            log::warn!(
                "evolved field reaches the grid boundary ({:.2e} of peak); widen the grid",
                after.boundary_ratio
            );
        }
        Ok(out)
    }
}

/// Boundary and spectral-content diagnostics of a field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldDiagnostics {
    /// Largest amplitude among the four outermost samples on each side, relative to the peak.
    pub boundary_ratio: f64,
    /// Fraction of spectral power at `|q| > 3/4` of the Nyquist wavenumber.
    pub spectral_tail: f64,
}

pub fn diagnose(field: &ComplexField) -> FieldDiagnostics {
    let amps = field.amps();
    let n = amps.len();
    let peak = field.max_abs();
    if peak == 0.0 {
        return FieldDiagnostics {
            boundary_ratio: 0.0,
            spectral_tail: 0.0,
        };
    }
    let edge = 4.min(n / 2);
    let boundary = amps[..edge]
        .iter()
        .chain(&amps[n - edge..])
        .map(|a| a.norm())
        .fold(0.0, f64::max);

    let mut spectrum = amps.to_vec();
    FftPlanner::new().plan_fft_forward(n).process(&mut spectrum);
    let q = field.grid().wavenumbers();
    let q_cut = 0.75 * PI / field.grid().dx();
    let (mut tail, mut total) = (0.0, 0.0);
    for (s, &qj) in spectrum.iter().zip(&q) {
        let p = s.norm_sqr();
        total += p;
        if qj.abs() > q_cut {
            tail += p;
        }
    }
    FieldDiagnostics {
        boundary_ratio: boundary / peak,
        spectral_tail: if total > 0.0 { tail / total } else { 0.0 },
    }
}

/// Evolves `field` under `plan`, warning when the grid is too narrow or too coarse.
pub fn split_step_evolve(field: &ComplexField, plan: &EvolutionPlan) -> Result<ComplexField> {
    Evolver::new(*field.grid(), *plan).evolve(field)
}

/// Numerical propagator: column `j` is the evolved discrete delta at `x_j`
/// (height `1/dx`), so entry `(i, j)` approximates `K(x_i, z_end; x_j, z_start)`.
#[derive(Debug, Clone)]
pub struct PropagatorMatrix {
    grid: SpatialGrid,
    columns: Vec<Vec<Complex64>>,
}

impl PropagatorMatrix {
    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.columns[j][i]
    }

    pub fn column(&self, j: usize) -> &[Complex64] {
        &self.columns[j]
    }
}

pub fn propagator_matrix(grid: &SpatialGrid, plan: &EvolutionPlan) -> Result<PropagatorMatrix> {
    propagator_columns(grid, plan, &(0..grid.n()).collect::<Vec<_>>())
}

/// Selected columns of the numerical propagator; the remaining columns are left empty.
pub fn propagator_columns(
    grid: &SpatialGrid,
    plan: &EvolutionPlan,
    which: &[usize],
) -> Result<PropagatorMatrix> {
    if grid.n() > MAX_MATRIX_N {
        return Err(Error::InvalidGrid(format!(
            "propagator matrix limited to n <= {MAX_MATRIX_N}, got {}",
            grid.n()
        )));
    }
    if let Some(&bad) = which.iter().find(|&&j| j >= grid.n()) {
        return Err(Error::param(
            "column",
            format!("index {bad} outside grid of {}", grid.n()),
        ));
    }
    let evolver = Evolver::new(*grid, *plan);
    let height = Complex64::new(1.0 / grid.dx(), 0.0);
    let evolved: Vec<(usize, Vec<Complex64>)> = which
        .par_iter()
        .map(|&j| {
            let mut col = vec![Complex64::new(0.0, 0.0); grid.n()];
            col[j] = height;
            evolver.evolve_in_place(&mut col).map(|_| (j, col))
        })
        .collect::<Result<_>>()?;
    let mut columns = vec![Vec::new(); grid.n()];
    for (j, col) in evolved {
        columns[j] = col;
    }
    Ok(PropagatorMatrix {
        grid: *grid,
        columns,
    })
}
