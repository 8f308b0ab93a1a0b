use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;

/// Complex amplitude sampled on a [`SpatialGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: SpatialGrid,
    amps: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: SpatialGrid, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != grid.n() {
            return Err(Error::GridMismatch(format!(
                "{} amplitudes for a grid of {} samples",
                amps.len(),
                grid.n()
            )));
        }
        Ok(Self { grid, amps })
    }

    pub fn zeros(grid: SpatialGrid) -> Self {
        Self {
            grid,
            amps: vec![Complex64::new(0.0, 0.0); grid.n()],
        }
    }

    pub fn from_fn(grid: SpatialGrid, f: impl Fn(f64) -> Complex64) -> Self {
        let amps = (0..grid.n()).map(|j| f(grid.x(j))).collect();
        Self { grid, amps }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amps_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_amps(self) -> Vec<Complex64> {
        self.amps
    }

    /// `Σ |ψ_j|² dx`.
    pub fn norm2(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    pub fn max_abs(&self) -> f64 {
        self.amps.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    pub fn argmax_abs(&self) -> usize {
        let mut best = 0;
        let mut best_v = f64::NEG_INFINITY;
        for (j, a) in self.amps.iter().enumerate() {
            let v = a.norm_sqr();
            if v > best_v {
                best_v = v;
                best = j;
            }
        }
        best
    }

    /// Amplitude at the sample nearest to `x`.
    pub fn at(&self, x: f64) -> Result<Complex64> {
        Ok(self.amps[self.grid.nearest_index(x)?])
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            grid: self.grid,
            amps: self.amps.iter().map(|a| a * c).collect(),
        }
    }

    /// Returns a copy multiplied pointwise by `exp(i phase(x))`.
    pub fn with_phase(&self, phase: impl Fn(f64) -> f64) -> Self {
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(j, a)| a * Complex64::from_polar(1.0, phase(self.grid.x(j))))
            .collect();
        Self {
            grid: self.grid,
            amps,
        }
    }

    /// `Σ conj(self_j) other_j dx`.
    pub fn inner(&self, other: &ComplexField) -> Result<Complex64> {
        self.grid.ensure_same(&other.grid)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            * self.grid.dx())
    }

    pub fn add(&self, other: &ComplexField) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            amps: self
                .amps
                .iter()
                .zip(&other.amps)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }
}

/// L²-normalized real Gaussian with `|ψ|² ∝ exp(-(x - x_center)² / a_x²)`.
pub fn gaussian_packet(grid: &SpatialGrid, a_x: f64, x_center: f64) -> Result<ComplexField> {
    if !(a_x > 0.0 && a_x.is_finite()) {
        return Err(Error::param("a_x", format!("must be > 0, got {a_x}")));
    }
    if grid.span() < 6.0 * a_x {
        log::warn!(
            "grid span {:.4} mm is narrower than 6 waists ({:.4} mm); the packet is truncated",
            grid.span(),
            6.0 * a_x
        );
    }
    let mut field = ComplexField::from_fn(*grid, |x| {
        let u = (x - x_center) / a_x;
        Complex64::new((-0.5 * u * u).exp(), 0.0)
    });
    let norm = field.norm2();
    if !(norm > 0.0) {
        return Err(Error::param(
            "x_center",
            format!("packet centred at {x_center} mm has no support on the grid"),
        ));
    }
    let s = 1.0 / norm.sqrt();
    for a in field.amps_mut() {
        *a *= s;
    }
    Ok(field)
}

/// V-shaped phase profile `slope · |x - x_vertex|`, the usual calibration pattern.
pub fn v_phase(slope: f64, x_vertex: f64) -> impl Fn(f64) -> f64 {
    move |x| slope * (x - x_vertex).abs()
}
