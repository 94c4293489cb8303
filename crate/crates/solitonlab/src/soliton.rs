//! Soliton parameters σ = (a, v, γ, μ), synthesis of η_σ on Cartesian grids,
//! the tangent frame of the soliton manifold, and the moving-frame transform
//! `S_{avγ}` and its inverse.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::grid::SpatialGrid;
use crate::profile::ProfileView;

/// Modulation parameters of a solitary wave: position, velocity, phase
/// (stored unwrapped) and frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct SolitonParams {
    pub a: Vec<f64>,
    pub v: Vec<f64>,
    pub gamma: f64,
    pub mu: f64,
}

impl SolitonParams {
    pub fn new(a: Vec<f64>, v: Vec<f64>, gamma: f64, mu: f64) -> Self {
        SolitonParams { a, v, gamma, mu }
    }

    /// Resting soliton at the origin.
    pub fn base(dim: usize, mu: f64) -> Self {
        SolitonParams {
            a: vec![0.0; dim],
            v: vec![0.0; dim],
            gamma: 0.0,
            mu,
        }
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn is_finite(&self) -> bool {
        self.a.iter().all(|x| x.is_finite())
            && self.v.iter().all(|x| x.is_finite())
            && self.gamma.is_finite()
            && self.mu.is_finite()
    }

    pub fn gamma_mod_2pi(&self) -> f64 {
        self.gamma.rem_euclid(2.0 * std::f64::consts::PI)
    }

    /// Flat parameter vector in the frame ordering (a, v, γ, μ).
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = self.a.clone();
        out.extend_from_slice(&self.v);
        out.push(self.gamma);
        out.push(self.mu);
        out
    }

    pub fn from_vec(dim: usize, x: &[f64]) -> Self {
        SolitonParams {
            a: x[..dim].to_vec(),
            v: x[dim..2 * dim].to_vec(),
            gamma: x[2 * dim],
            mu: x[2 * dim + 1],
        }
    }
}

/// Guard margin: the soliton center must stay at least `10/√μ` away from the
/// box boundary, so wrap-around is below the exponential tail.
pub fn check_guard(sigma: &SolitonParams, grid: &SpatialGrid) -> Result<()> {
    let margin = 10.0 / sigma.mu.sqrt();
    for axis in 0..grid.dim() {
        if sigma.a[axis].abs() + margin > grid.half_extent(axis) {
            return Err(Error::numerical(
                "guard margin",
                format!(
                    "soliton center {:.4} within {margin:.3} of the boundary (axis {axis})",
                    sigma.a[axis]
                ),
            ));
        }
    }
    Ok(())
}

fn phase_at(sigma: &SolitonParams, dx: &[f64]) -> f64 {
    let mut p = sigma.gamma;
    for (vj, dj) in sigma.v.iter().zip(dx) {
        p += 0.5 * vj * dj;
    }
    p
}

/// Synthesizes `η_σ = e^{i(½v·(x-a)+γ)} η_μ(|x-a|)` on the grid.
pub fn synthesize(
    view: &ProfileView,
    sigma: &SolitonParams,
    grid: &Arc<SpatialGrid>,
) -> Result<ComplexField> {
    if sigma.dim() != grid.dim() {
        return Err(Error::InvalidInput(
            "σ dimension does not match grid".into(),
        ));
    }
    check_guard(sigma, grid)?;
    let d = grid.dim();
    let mut dx = [0.0f64; 2];
    let values = (0..grid.len())
        .map(|i| {
            let x = grid.position(i);
            let mut r2 = 0.0;
            for a in 0..d {
                dx[a] = x[a] - sigma.a[a];
                r2 += dx[a] * dx[a];
            }
            let amp = view.eta(r2.sqrt());
            Complex64::from_polar(amp, phase_at(sigma, &dx[..d]))
        })
        .collect();
    ComplexField::new(grid.clone(), values)
}

/// The 2d+2 tangent fields of the soliton manifold at σ, transformed by
/// `S_{avγ}` and ordered (translations, boosts, gauge, scaling):
/// `z_t = -∇η`, `z_b = i x η`, `z_g = i η`, `z_s = ∂_μ η`.
#[derive(Debug, Clone)]
pub struct TangentFrame {
    pub sigma: SolitonParams,
    pub fields: Vec<ComplexField>,
}

impl TangentFrame {
    pub fn count(&self) -> usize {
        self.fields.len()
    }

    pub fn translation(&self, j: usize) -> &ComplexField {
        &self.fields[j]
    }

    pub fn boost(&self, j: usize) -> &ComplexField {
        &self.fields[self.sigma.dim() + j]
    }

    pub fn gauge(&self) -> &ComplexField {
        &self.fields[2 * self.sigma.dim()]
    }

    pub fn scaling(&self) -> &ComplexField {
        &self.fields[2 * self.sigma.dim() + 1]
    }
}

pub fn tangent_frame(
    view: &ProfileView,
    sigma: &SolitonParams,
    grid: &Arc<SpatialGrid>,
) -> Result<TangentFrame> {
    if sigma.dim() != grid.dim() {
        return Err(Error::InvalidInput(
            "σ dimension does not match grid".into(),
        ));
    }
    check_guard(sigma, grid)?;
    let d = grid.dim();
    let len = grid.len();
    let mut fields: Vec<Vec<Complex64>> = vec![vec![Complex64::default(); len]; 2 * d + 2];
    let mut dx = [0.0f64; 2];
    for i in 0..len {
        let x = grid.position(i);
        let mut r2 = 0.0;
        for a in 0..d {
            dx[a] = x[a] - sigma.a[a];
            r2 += dx[a] * dx[a];
        }
        let r = r2.sqrt();
        let eta = view.eta(r);
        let slope = view.eta_prime_over_r(r);
        let dmu = view.dmu_eta(r);
        let ph = Complex64::from_polar(1.0, phase_at(sigma, &dx[..d]));
        for a in 0..d {
            fields[a][i] = ph * Complex64::new(-dx[a] * slope, 0.0);
            fields[d + a][i] = ph * Complex64::new(0.0, dx[a] * eta);
        }
        fields[2 * d][i] = ph * Complex64::new(0.0, eta);
        fields[2 * d + 1][i] = ph * Complex64::new(dmu, 0.0);
    }
    let fields = fields
        .into_iter()
        .map(|v| ComplexField::new(grid.clone(), v))
        .collect::<Result<Vec<_>>>()?;
    Ok(TangentFrame {
        sigma: sigma.clone(),
        fields,
    })
}

/// Moving-frame transform `u = S⁻¹_{avγ} ψ`, i.e.
/// `u(x) = e^{-i(½v·x+γ)} ψ(x+a)`. The shift is a Fourier phase (exact for
/// band-limited fields); the whole map is unitary.
pub fn to_moving_frame(psi: &ComplexField, sigma: &SolitonParams) -> Result<ComplexField> {
    let d = psi.grid().dim();
    if sigma.dim() != d {
        return Err(Error::InvalidInput(
            "σ dimension does not match grid".into(),
        ));
    }
    let neg_a: Vec<f64> = sigma.a.iter().map(|x| -x).collect();
    let shifted = psi.fourier_shift(&neg_a)?;
    let grid = psi.grid().clone();
    let values = shifted
        .values()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let x = grid.position(i);
            let mut p = sigma.gamma;
            for a in 0..d {
                p += 0.5 * sigma.v[a] * x[a];
            }
            v * Complex64::from_polar(1.0, -p)
        })
        .collect();
    ComplexField::new(grid, values)
}

/// Inverse transform `ψ = S_{avγ} u = e^{i(½v·(x-a)+γ)} u(x-a)`.
pub fn from_moving_frame(u: &ComplexField, sigma: &SolitonParams) -> Result<ComplexField> {
    let d = u.grid().dim();
    if sigma.dim() != d {
        return Err(Error::InvalidInput(
            "σ dimension does not match grid".into(),
        ));
    }
    let grid = u.grid().clone();
    let values: Vec<Complex64> = u
        .values()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let x = grid.position(i);
            let mut p = sigma.gamma;
            for a in 0..d {
                p += 0.5 * sigma.v[a] * x[a];
            }
            v * Complex64::from_polar(1.0, p)
        })
        .collect();
    ComplexField::new(grid, values)?.fourier_shift(&sigma.a)
}
