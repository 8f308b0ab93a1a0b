use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Measuring step of the camera-side imaging, 2.67 µm, in mm.
pub const DEFAULT_DX: f64 = 2.67e-3;

/// Default production grid size.
pub const DEFAULT_N: usize = 4096;

/// Uniform 1-D transverse grid: `x_j = x0 + (j - n/2) dx` for `j in 0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    n: usize,
    dx: f64,
    x0: f64,
}

impl SpatialGrid {
    pub fn new(n: usize, dx: f64, x0: f64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n must be a power of two and at least 8, got {n}"
            )));
        }
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::InvalidGrid(format!("dx must be > 0, got {dx}")));
        }
        if !x0.is_finite() {
            return Err(Error::InvalidGrid(format!("x0 must be finite, got {x0}")));
        }
        Ok(Self { n, dx, x0 })
    }

    /// Grid whose spacing satisfies `λ z = n · dx²`.
    ///
    /// On such a grid the discrete free-space transfer function maps a
    /// one-cell delta exactly onto the sampled continuum kernel, so
    /// single-pixel slits reproduce `K_f` without discretization error.
    pub fn fresnel_critical(n: usize, wavelength: f64, z: f64, x0: f64) -> Result<Self> {
        if !(wavelength > 0.0 && z > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "critical sampling needs wavelength > 0 and z > 0 (got {wavelength}, {z})"
            )));
        }
        Self::new(n, (wavelength * z / n as f64).sqrt(), x0)
    }

    /// Grid whose spacing matches the oscillator's phase-space scale,
    /// `dx² = λ / (n ω)`: a quarter period then maps the grid's momentum
    /// lattice onto its position lattice, which keeps harmonic kernels
    /// resolved across the whole window.
    pub fn oscillator_matched(n: usize, wavelength: f64, omega: f64, x0: f64) -> Result<Self> {
        if !(wavelength > 0.0 && omega > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "oscillator matching needs wavelength > 0 and omega > 0 (got {wavelength}, {omega})"
            )));
        }
        Self::new(n, (wavelength / (n as f64 * omega)).sqrt(), x0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn span(&self) -> f64 {
        self.n as f64 * self.dx
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x0 + (j as f64 - (self.n / 2) as f64) * self.dx
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    pub fn x_min(&self) -> f64 {
        self.x(0)
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.n - 1)
    }

    /// Angular wavenumbers in FFT order: `0, dk, ..., (n/2-1) dk, -n/2 dk, ..., -dk`.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let dk = 2.0 * PI / self.span();
        let half = self.n / 2;
        (0..self.n)
            .map(|j| {
                if j < half {
                    j as f64 * dk
                } else {
                    (j as f64 - self.n as f64) * dk
                }
            })
            .collect()
    }

    /// Index of the sample nearest to `x`; errors if `x` lies outside the
    /// grid by more than half a cell.
    pub fn nearest_index(&self, x: f64) -> Result<usize> {
        let half = 0.5 * self.dx;
        if !x.is_finite() || x < self.x_min() - half || x > self.x_max() + half {
            return Err(Error::OffGrid {
                x,
                lo: self.x_min(),
                hi: self.x_max(),
            });
        }
        let j = ((x - self.x0) / self.dx).round() + (self.n / 2) as f64;
        Ok((j.max(0.0) as usize).min(self.n - 1))
    }

    /// Whether two grids sample the same positions.
    pub fn same_as(&self, other: &SpatialGrid) -> bool {
        self.n == other.n
            && (self.dx - other.dx).abs() <= 1e-12 * self.dx
            && (self.x0 - other.x0).abs() <= 1e-12 * self.dx.max(self.x0.abs())
    }

    pub(crate) fn ensure_same(&self, other: &SpatialGrid) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "(n={}, dx={}, x0={}) vs (n={}, dx={}, x0={})",
                self.n, self.dx, self.x0, other.n, other.dx, other.x0
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_grid_positions() {
        let g = SpatialGrid::new(8, 1.0, 0.0).unwrap();
        assert_eq!(g.xs(), vec![-4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn default_step_span() {
        let g = SpatialGrid::new(1024, 0.00267, 0.0).unwrap();
        assert!((g.span() - 2.734).abs() < 1e-3);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(SpatialGrid::new(7, 1.0, 0.0).is_err());
        assert!(SpatialGrid::new(4, 1.0, 0.0).is_err());
        assert!(SpatialGrid::new(12, 1.0, 0.0).is_err());
        assert!(SpatialGrid::new(8, 0.0, 0.0).is_err());
        assert!(SpatialGrid::new(8, -1.0, 0.0).is_err());
    }

    #[test]
    fn wavenumber_ordering() {
        let g = SpatialGrid::new(8, 0.5, 0.0).unwrap();
        let dk = 2.0 * PI / 4.0;
        let k = g.wavenumbers();
        let expected = [0.0, 1.0, 2.0, 3.0, -4.0, -3.0, -2.0, -1.0];
        for (a, b) in k.iter().zip(expected) {
            assert!((a - b * dk).abs() < 1e-12);
        }
    }

    #[test]
    fn nearest_index_snaps_and_rejects() {
        let g = SpatialGrid::new(8, 1.0, 0.5).unwrap();
        assert_eq!(g.nearest_index(0.5).unwrap(), 4);
        assert_eq!(g.nearest_index(0.9).unwrap(), 4);
        assert_eq!(g.nearest_index(1.1).unwrap(), 5);
        assert_eq!(g.nearest_index(-3.5).unwrap(), 0);
        assert!(g.nearest_index(4.1).is_err());
        assert!(g.nearest_index(-4.1).is_err());
    }

    #[test]
    fn critical_spacing() {
        let g = SpatialGrid::fresnel_critical(1024, 795e-6, 5.0, 0.0).unwrap();
        assert!((795e-6 * 5.0 - 1024.0 * g.dx() * g.dx()).abs() < 1e-15);
    }

    #[test]
    fn oscillator_spacing() {
        let omega = 2.0 * std::f64::consts::PI / 30.26;
        let g = SpatialGrid::oscillator_matched(2048, 795e-6, omega, 0.0).unwrap();
        let k = 2.0 * std::f64::consts::PI / 795e-6;
        // Momentum spacing divided by k ω equals the position spacing.
        let dq = 2.0 * std::f64::consts::PI / g.span();
        assert!((dq / (k * omega) - g.dx()).abs() < 1e-15);
        assert!(SpatialGrid::oscillator_matched(2048, 795e-6, 0.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn positions_strictly_increasing(p in 3u32..12, dx in 1e-4f64..10.0, x0 in -5.0f64..5.0) {
            let g = SpatialGrid::new(1 << p, dx, x0).unwrap();
            let xs = g.xs();
            for w in xs.windows(2) {
                prop_assert!(w[1] > w[0]);
                prop_assert!(((w[1] - w[0]) - dx).abs() < 1e-9 * dx.max(x0.abs()));
            }
        }
    }
}
