//! Periodic box discretization: the stage on which all fields live.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Uniform periodic grid on the box `[-L_j, L_j)^d`, `d ∈ {1, 2}`, with `n`
/// points per axis (`n` a power of two) and precomputed wavenumber tables.
///
/// Axis `j` carries nodes `x_i = -L_j + i h_j`, `h_j = 2 L_j / n`, and the
/// standard periodic wavenumber set `k = (π/L_j)·{0, 1, …, n/2-1, -n/2, …, -1}`
/// in FFT order. Values are stored row-major (axis 0 slowest).
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    dim: usize,
    half_extent: Vec<f64>,
    n: usize,
    spacing: Vec<f64>,
    wavenumbers: Vec<Vec<f64>>,
}

impl SpatialGrid {
    pub fn new(dim: usize, half_extent: &[f64], n: usize) -> Result<Arc<Self>> {
        if dim == 0 || dim > 2 {
            return Err(Error::InvalidInput(format!(
                "dimension {dim} not in {{1,2}}"
            )));
        }
        if half_extent.len() != dim {
            return Err(Error::InvalidInput(format!(
                "expected {dim} half-extents, got {}",
                half_extent.len()
            )));
        }
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::InvalidInput(format!(
                "points-per-axis must be a power of two ≥ 16, got {n}"
            )));
        }
        if half_extent.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidInput("half-extents must be positive".into()));
        }
        let spacing: Vec<f64> = half_extent.iter().map(|&l| 2.0 * l / n as f64).collect();
        let wavenumbers = half_extent
            .iter()
            .map(|&l| {
                let dk = std::f64::consts::PI / l;
                (0..n)
                    .map(|i| {
                        let m = if i <= n / 2 {
                            i as i64
                        } else {
                            i as i64 - n as i64
                        };
                        // FFT ordering; index n/2 is the Nyquist mode -n/2·dk.
                        let m = if i == n / 2 { -(n as i64) / 2 } else { m };
                        m as f64 * dk
                    })
                    .collect()
            })
            .collect();
        Ok(Arc::new(SpatialGrid {
            dim,
            half_extent: half_extent.to_vec(),
            n,
            spacing,
            wavenumbers,
        }))
    }

    /// Convenience constructor for a cube: same half-extent on every axis.
    pub fn new_cube(dim: usize, half_extent: f64, n: usize) -> Result<Arc<Self>> {
        Self::new(dim, &vec![half_extent; dim], n)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    /// Total number of grid points, `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn half_extent(&self, axis: usize) -> f64 {
        self.half_extent[axis]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.spacing[axis]
    }

    /// Quadrature cell volume `h_1 ⋯ h_d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn wavenumbers(&self, axis: usize) -> &[f64] {
        &self.wavenumbers[axis]
    }

    /// Coordinate of node `i` along `axis`.
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        -self.half_extent[axis] + i as f64 * self.spacing[axis]
    }

    /// Multi-index of the flat index (row-major, axis 0 slowest).
    pub fn unravel(&self, flat: usize) -> [usize; 2] {
        match self.dim {
            1 => [flat, 0],
            _ => [flat / self.n, flat % self.n],
        }
    }

    /// Position vector of a flat index; unused components are zero.
    pub fn position(&self, flat: usize) -> [f64; 2] {
        let idx = self.unravel(flat);
        let mut x = [0.0; 2];
        for a in 0..self.dim {
            x[a] = self.coord(a, idx[a]);
        }
        x
    }

    /// Checks that two fields share a grid; `what` names the operation for diagnostics.
    pub fn check_same(a: &Arc<SpatialGrid>, b: &Arc<SpatialGrid>, what: &str) -> Result<()> {
        if Arc::ptr_eq(a, b) || **a == **b {
            Ok(())
        } else {
            Err(Error::GridMismatch(what.to_string()))
        }
    }
}
