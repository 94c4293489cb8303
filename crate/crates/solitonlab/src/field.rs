//! Complex and real sample fields on a periodic grid, plus the spectral
//! calculus (Fourier derivatives, pairings, norms, convolution) shared by
//! every other module.
//!
//! Conventions: forward transforms are unnormalized, inverses carry `1/n^d`;
//! quadrature is the plain Riemann sum `h^d Σ`, which is spectrally accurate
//! for smooth periodic integrands.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
    static SCRATCH: RefCell<Vec<Complex64>> = const { RefCell::new(Vec::new()) };
}

fn fft_axis(data: &mut [Complex64], n: usize, forward: bool) {
    let fft = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if forward {
            p.plan_fft_forward(n)
        } else {
            p.plan_fft_inverse(n)
        }
    });
    SCRATCH.with(|s| {
        let mut s = s.borrow_mut();
        s.resize(fft.get_inplace_scratch_len().max(n), Complex64::default());
        for chunk in data.chunks_exact_mut(n) {
            fft.process_with_scratch(chunk, &mut s);
        }
    });
}

/// In-place unnormalized forward transform over all axes (row-major layout).
fn forward(grid: &SpatialGrid, data: &mut [Complex64]) {
    let n = grid.points_per_axis();
    fft_axis(data, n, true); // contiguous last axis
    if grid.dim() == 2 {
        transpose_square(data, n);
        fft_axis(data, n, true);
        transpose_square(data, n);
    }
}

/// In-place inverse transform with the `1/n^d` normalization.
fn inverse(grid: &SpatialGrid, data: &mut [Complex64]) {
    let n = grid.points_per_axis();
    fft_axis(data, n, false);
    if grid.dim() == 2 {
        transpose_square(data, n);
        fft_axis(data, n, false);
        transpose_square(data, n);
    }
    let norm = 1.0 / grid.len() as f64;
    for v in data.iter_mut() {
        *v *= norm;
    }
}

fn transpose_square(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// Both pairings of the phase space: the real inner product `Re ∫ u v̄` and
/// the symplectic form `ω(u,v) = Im ∫ u v̄ = ⟨u, J⁻¹v⟩` with `J = 1/i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerProducts {
    pub real_inner: f64,
    pub symplectic: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub h1: f64,
}

/// Complex amplitude samples ψ on a grid; the PDE state.
#[derive(Debug, Clone)]
pub struct ComplexField {
    grid: Arc<SpatialGrid>,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: Arc<SpatialGrid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "value count {} does not match grid point count {}",
                values.len(),
                grid.len()
            )));
        }
        if !values.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::numerical("field construction", "non-finite values"));
        }
        Ok(ComplexField { grid, values })
    }

    pub fn zeros(grid: Arc<SpatialGrid>) -> Self {
        let len = grid.len();
        ComplexField {
            grid,
            values: vec![Complex64::default(); len],
        }
    }

    /// Builds a field by evaluating `f` at every node position.
    pub fn from_fn(grid: Arc<SpatialGrid>, mut f: impl FnMut(&[f64]) -> Complex64) -> Self {
        let d = grid.dim();
        let values = (0..grid.len())
            .map(|i| {
                let x = grid.position(i);
                f(&x[..d])
            })
            .collect();
        ComplexField { grid, values }
    }

    pub fn grid(&self) -> &Arc<SpatialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values
            .iter()
            .all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn real_part(&self) -> RealField {
        RealField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.re).collect(),
        }
    }

    pub fn imag_part(&self) -> RealField {
        RealField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.im).collect(),
        }
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        ComplexField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(
        &self,
        other: &Self,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<Self> {
        SpatialGrid::check_same(&self.grid, &other.grid, "zip_map")?;
        Ok(ComplexField {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        self.map(|v| c * v)
    }

    /// `self + c · other`.
    pub fn axpy(&self, c: Complex64, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + c * b)
    }

    pub fn mul_real(&self, w: &RealField) -> Result<Self> {
        SpatialGrid::check_same(&self.grid, &w.grid, "mul_real")?;
        Ok(ComplexField {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&w.values)
                .map(|(&a, &b)| a * b)
                .collect(),
        })
    }

    /// Both pairings in one pass. `ω(u,v) = Im ∫ u v̄` is antisymmetric,
    /// `⟨u,v⟩ = Re ∫ u v̄` symmetric; both use `h^d Σ` quadrature.
    pub fn inner_products(&self, other: &Self) -> Result<InnerProducts> {
        SpatialGrid::check_same(&self.grid, &other.grid, "inner_products")?;
        let mut re = 0.0;
        let mut im = 0.0;
        for (a, b) in self.values.iter().zip(&other.values) {
            let p = a * b.conj();
            re += p.re;
            im += p.im;
        }
        let vol = self.grid.cell_volume();
        Ok(InnerProducts {
            real_inner: vol * re,
            symplectic: vol * im,
        })
    }

    pub fn real_inner(&self, other: &Self) -> Result<f64> {
        Ok(self.inner_products(other)?.real_inner)
    }

    pub fn symplectic(&self, other: &Self) -> Result<f64> {
        Ok(self.inner_products(other)?.symplectic)
    }

    pub fn norm_l2(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        (self.grid.cell_volume() * s).sqrt()
    }

    /// L² and H¹ norms; the gradient part is evaluated in Fourier space, so
    /// `h1 ≥ l2` holds structurally.
    pub fn norms(&self) -> Norms {
        let l2 = self.norm_l2();
        let mut hat = self.values.clone();
        forward(&self.grid, &mut hat);
        let scale = self.grid.cell_volume() / self.grid.len() as f64;
        let mut grad2 = 0.0;
        for (i, v) in hat.iter().enumerate() {
            grad2 += scale * self.ksq_at(i) * v.norm_sqr();
        }
        Norms {
            l2,
            h1: (l2 * l2 + grad2).sqrt(),
        }
    }

    fn ksq_at(&self, flat: usize) -> f64 {
        let idx = self.grid.unravel(flat);
        let mut k2 = 0.0;
        for a in 0..self.grid.dim() {
            let k = self.grid.wavenumbers(a)[idx[a]];
            k2 += k * k;
        }
        k2
    }

    /// L² norm computed entirely on the Fourier side (Parseval route).
    pub fn norm_l2_fourier(&self) -> f64 {
        let mut hat = self.values.clone();
        forward(&self.grid, &mut hat);
        let scale = self.grid.cell_volume() / self.grid.len() as f64;
        let s: f64 = hat.iter().map(|v| v.norm_sqr()).sum();
        (scale * s).sqrt()
    }

    /// Fourier-multiplier derivative `∂^order` along `axis`; exact for
    /// band-limited fields. Order 1 zeroes the Nyquist mode, order 2 uses `-k²`.
    pub fn spectral_derivative(&self, axis: usize, order: u32) -> Result<Self> {
        if !(1..=2).contains(&order) {
            return Err(Error::InvalidInput(format!(
                "derivative order {order} not in {{1,2}}"
            )));
        }
        if axis >= self.grid.dim() {
            return Err(Error::InvalidInput(format!(
                "axis {axis} out of range for dimension {}",
                self.grid.dim()
            )));
        }
        let n = self.grid.points_per_axis();
        let mut hat = self.values.clone();
        forward(&self.grid, &mut hat);
        let ks = self.grid.wavenumbers(axis);
        for (i, v) in hat.iter_mut().enumerate() {
            let idx = self.grid.unravel(i);
            let k = ks[idx[axis]];
            *v = match order {
                1 => {
                    if idx[axis] == n / 2 {
                        Complex64::default()
                    } else {
                        Complex64::new(0.0, k) * *v
                    }
                }
                _ => -k * k * *v,
            };
        }
        inverse(&self.grid, &mut hat);
        Ok(ComplexField {
            grid: self.grid.clone(),
            values: hat,
        })
    }

    /// Spectral Laplacian over all axes.
    pub fn laplacian(&self) -> Self {
        let mut hat = self.values.clone();
        forward(&self.grid, &mut hat);
        for (i, v) in hat.iter_mut().enumerate() {
            *v *= -self.ksq_at(i);
        }
        inverse(&self.grid, &mut hat);
        ComplexField {
            grid: self.grid.clone(),
            values: hat,
        }
    }

    /// In-place spectral multiplication by a precomputed table (one entry per
    /// mode, FFT ordering); the kinetic propagator of the splitting.
    pub fn spectral_map_in_place(&mut self, table: &[Complex64]) {
        let grid = self.grid.clone();
        let mut hat = std::mem::take(&mut self.values);
        forward(&grid, &mut hat);
        for (v, t) in hat.iter_mut().zip(table) {
            *v *= t;
        }
        inverse(&grid, &mut hat);
        self.values = hat;
    }

    /// Applies a Fourier multiplier `m(k²)` (used by the kinetic propagator
    /// and the H¹ Gram operator).
    pub fn fourier_multiplier(&self, m: impl Fn(f64) -> Complex64) -> Self {
        let mut hat = self.values.clone();
        forward(&self.grid, &mut hat);
        for (i, v) in hat.iter_mut().enumerate() {
            *v *= m(self.ksq_at(i));
        }
        inverse(&self.grid, &mut hat);
        ComplexField {
            grid: self.grid.clone(),
            values: hat,
        }
    }

    /// Translation `u(x) → u(x - a)` as a Fourier phase shift; exact for
    /// band-limited fields and unitary on the torus.
    pub fn fourier_shift(&self, shift: &[f64]) -> Result<Self> {
        if shift.len() != self.grid.dim() {
            return Err(Error::InvalidInput("shift dimension mismatch".into()));
        }
        let mut hat = self.values.clone();
        forward(&self.grid, &mut hat);
        for (i, v) in hat.iter_mut().enumerate() {
            let idx = self.grid.unravel(i);
            let mut phase = 0.0;
            for a in 0..self.grid.dim() {
                phase -= self.grid.wavenumbers(a)[idx[a]] * shift[a];
            }
            *v *= Complex64::from_polar(1.0, phase);
        }
        inverse(&self.grid, &mut hat);
        Ok(ComplexField {
            grid: self.grid.clone(),
            values: hat,
        })
    }

    /// Zeroes all modes with `|k_a| > (2/3) k_max` on any axis (2/3 dealias rule).
    pub fn dealias(&mut self) {
        let n = self.grid.points_per_axis();
        let grid = self.grid.clone();
        let mut hat = std::mem::take(&mut self.values);
        forward(&grid, &mut hat);
        let cutoff = (n as f64 / 3.0).floor() as i64; // keep |m| ≤ n/3
        for (i, v) in hat.iter_mut().enumerate() {
            let idx = grid.unravel(i);
            for a in 0..grid.dim() {
                let m = if idx[a] <= n / 2 {
                    idx[a] as i64
                } else {
                    idx[a] as i64 - n as i64
                };
                if m.abs() > cutoff {
                    *v = Complex64::default();
                }
            }
        }
        inverse(&grid, &mut hat);
        self.values = hat;
    }
}

/// Real-valued samples on a grid (potentials, densities, kernels).
#[derive(Debug, Clone)]
pub struct RealField {
    grid: Arc<SpatialGrid>,
    values: Vec<f64>,
}

impl RealField {
    pub fn new(grid: Arc<SpatialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "value count {} does not match grid point count {}",
                values.len(),
                grid.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::numerical("field construction", "non-finite values"));
        }
        Ok(RealField { grid, values })
    }

    pub fn zeros(grid: Arc<SpatialGrid>) -> Self {
        let len = grid.len();
        RealField {
            grid,
            values: vec![0.0; len],
        }
    }

    pub fn from_fn(grid: Arc<SpatialGrid>, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let d = grid.dim();
        let values = (0..grid.len())
            .map(|i| {
                let x = grid.position(i);
                f(&x[..d])
            })
            .collect();
        RealField { grid, values }
    }

    pub fn grid(&self) -> &Arc<SpatialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_complex(&self) -> ComplexField {
        ComplexField {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .map(|&v| Complex64::new(v, 0.0))
                .collect(),
        }
    }

    pub fn integral(&self) -> f64 {
        self.grid.cell_volume() * self.values.iter().sum::<f64>()
    }

    pub fn norm_l2(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v * v).sum();
        (self.grid.cell_volume() * s).sqrt()
    }
}

/// Rotates each axis by n/2 so a kernel sampled on `[-L, L)` becomes indexed
/// from its origin sample, as circular convolution requires.
fn ifftshift(grid: &SpatialGrid, values: &[Complex64]) -> Vec<Complex64> {
    let n = grid.points_per_axis();
    let mut out = vec![Complex64::default(); values.len()];
    match grid.dim() {
        1 => {
            for (i, v) in values.iter().enumerate() {
                out[(i + n / 2) % n] = *v;
            }
        }
        _ => {
            for (flat, v) in values.iter().enumerate() {
                let idx = grid.unravel(flat);
                let i = (idx[0] + n / 2) % n;
                let j = (idx[1] + n / 2) % n;
                out[i * n + j] = *v;
            }
        }
    }
    out
}

/// Periodic convolution `(W*g)(x) = h^d Σ_y W(x-y) g(y)` realized by a
/// forward/inverse transform pair; `W` is a position-space kernel centered at
/// the origin. The imaginary residue must stay below `1e-10` of the result
/// norm; it is asserted and then discarded.
pub fn periodic_convolution(w: &RealField, g: &RealField) -> Result<RealField> {
    SpatialGrid::check_same(&w.grid, &g.grid, "periodic_convolution")?;
    let grid = &w.grid;
    let centered: Vec<Complex64> = w.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut wh = ifftshift(grid, &centered);
    let mut gh: Vec<Complex64> = g.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    forward(grid, &mut wh);
    forward(grid, &mut gh);
    for (a, b) in wh.iter_mut().zip(&gh) {
        *a *= b;
    }
    inverse(grid, &mut wh);
    let vol = grid.cell_volume();
    let mut norm2 = 0.0;
    let mut imag2 = 0.0;
    for v in &wh {
        norm2 += v.re * v.re;
        imag2 += v.im * v.im;
    }
    if imag2.sqrt() > 1e-10 * norm2.sqrt().max(1e-300) {
        return Err(Error::numerical(
            "periodic_convolution",
            format!("imaginary residue {:.3e} beyond tolerance", imag2.sqrt()),
        ));
    }
    RealField::new(grid.clone(), wh.iter().map(|v| vol * v.re).collect())
}

/// Forward spectrum of a field (unnormalized coefficients in FFT order).
pub fn spectrum(field: &ComplexField) -> Vec<Complex64> {
    let mut hat = field.values().to_vec();
    forward(field.grid(), &mut hat);
    hat
}
