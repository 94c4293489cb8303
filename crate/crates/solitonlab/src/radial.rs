//! Radial discretization shared by the profile solver and the linearized
//! operators: staggered grids on `(0, r_max)` with the measure `r^{d-1} dr`,
//! conservative second-order tridiagonal operators (symmetrized to the flat
//! measure), sixth-order stencils for residual certificates, and a symmetric
//! tridiagonal eigensolver (Sturm bisection + inverse iteration).

use crate::error::{Error, Result};
use crate::model::Nonlinearity;

/// Staggered radial grid: nodes `r_i = (i+½)h`, `h = r_max/n`. The staggering
/// avoids the coordinate singularity at the origin and makes the midpoint
/// quadrature superalgebraically accurate for smooth even integrands.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    pub dim: usize,
    pub n: usize,
    pub h: f64,
    pub r_max: f64,
}

impl RadialGrid {
    pub fn new(dim: usize, r_max: f64, n: usize) -> Result<Self> {
        if dim == 0 || dim > 2 {
            return Err(Error::InvalidInput(format!(
                "radial dimension {dim} not in {{1,2}}"
            )));
        }
        if n < 64 || n > 8192 {
            return Err(Error::InvalidInput(format!(
                "radial point count {n} out of range"
            )));
        }
        if !(r_max > 0.0) {
            return Err(Error::InvalidInput("r_max must be positive".into()));
        }
        Ok(RadialGrid {
            dim,
            n,
            h: r_max / n as f64,
            r_max,
        })
    }

    pub fn node(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.h
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    /// Surface measure of the unit sphere section: `2` for d=1 (two half
    /// lines), `2π` for d=2.
    pub fn surface(&self) -> f64 {
        match self.dim {
            1 => 2.0,
            _ => 2.0 * std::f64::consts::PI,
        }
    }

    /// Full-space integral of a radial sample vector,
    /// `∫ f = surface · h · Σ r_i^{d-1} f_i`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        let mut s = 0.0;
        for (i, v) in f.iter().enumerate() {
            s += self.node(i).powi(self.dim as i32 - 1) * v;
        }
        self.surface() * self.h * s
    }

    /// Measure-weighted inner product `∫ f g`.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..f.len() {
            s += self.node(i).powi(self.dim as i32 - 1) * f[i] * g[i];
        }
        self.surface() * self.h * s
    }

    pub fn norm(&self, f: &[f64]) -> f64 {
        self.inner(f, f).sqrt()
    }

    /// `√(h·surface)·r^{(d-1)/2}` weights mapping to the flat-measure
    /// (symmetrized) representation `ũ = weight·u`.
    pub fn sym_weights(&self) -> Vec<f64> {
        let c = (self.surface() * self.h).sqrt();
        (0..self.n)
            .map(|i| c * self.node(i).powf((self.dim as f64 - 1.0) / 2.0))
            .collect()
    }
}

/// Angular eigenvalue `λ_k = k(d-2+k)` of the sphere Laplacian. For d=1 the
/// sectors are the parities: k=0 even, k=1 odd, both with λ=0.
pub fn lambda_k(d: usize, k: usize) -> f64 {
    (k * (d + k) - 2 * k) as f64
}

/// Parity of sector-k radial functions under r → -r (used by reflecting
/// difference stencils at the origin).
pub fn sector_parity(k: usize) -> i32 {
    if k % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Symmetric tridiagonal matrix (diagonal + one off-diagonal).
#[derive(Debug, Clone)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * x[i + 1];
            }
            y[i] = s;
        }
        y
    }

    /// Number of eigenvalues strictly below `lambda` (Sturm sequence count).
    pub fn count_below(&self, lambda: f64) -> usize {
        let n = self.n();
        let mut count = 0usize;
        let mut q = self.diag[0] - lambda;
        if q < 0.0 {
            count += 1;
        }
        let tiny = 1e-300;
        for i in 1..n {
            let mut denom = q;
            if denom.abs() < tiny {
                denom = if denom < 0.0 { -tiny } else { tiny };
            }
            q = self.diag[i] - lambda - self.off[i - 1] * self.off[i - 1] / denom;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.n();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.off[i - 1].abs();
            }
            if i + 1 < n {
                r += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// `j`-th smallest eigenvalue (0-based) via bisection on the Sturm count.
    pub fn eigenvalue(&self, j: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.count_below(mid) > j {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo < 1e-14 * (1.0 + mid.abs()) {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn lowest_eigenvalues(&self, count: usize) -> Vec<f64> {
        (0..count.min(self.n()))
            .map(|j| self.eigenvalue(j))
            .collect()
    }

    /// Eigenvector by inverse iteration at a converged eigenvalue. Returns a
    /// unit vector in the flat (symmetrized) representation.
    pub fn eigenvector(&self, lambda: f64) -> Vec<f64> {
        let n = self.n();
        // mild detuning keeps the shifted solve well-conditioned
        let shift = lambda + 1e-11 * (1.0 + lambda.abs());
        let mut v: Vec<f64> = (0..n)
            .map(|i| ((i * 2654435761usize) % 1000) as f64 / 1000.0 - 0.5)
            .collect();
        normalize(&mut v);
        for _ in 0..4 {
            let mut w = solve_tridiag_shifted(&self.diag, &self.off, shift, &v);
            normalize(&mut w);
            v = w;
        }
        // fix sign: make the largest-magnitude entry positive
        let mut imax = 0;
        for i in 0..n {
            if v[i].abs() > v[imax].abs() {
                imax = i;
            }
        }
        if v[imax] < 0.0 {
            for x in v.iter_mut() {
                *x = -*x;
            }
        }
        v
    }
}

fn normalize(v: &mut [f64]) {
    let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nrm > 0.0 {
        for x in v.iter_mut() {
            *x /= nrm;
        }
    }
}

/// Solves `(T - shift) x = b` for symmetric tridiagonal `T` by Gaussian
/// elimination with partial pivoting, keeping two superdiagonals as fill-in
/// (the shifted matrix may be indefinite or nearly singular, so plain Thomas
/// is not safe).
pub fn solve_tridiag_shifted(diag: &[f64], off: &[f64], shift: f64, b: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut d: Vec<f64> = diag.iter().map(|&x| x - shift).collect();
    let mut e = vec![0.0; n]; // first superdiagonal e[i] = A[i, i+1]
    let mut f = vec![0.0; n]; // second superdiagonal f[i] = A[i, i+2]
    let mut c = vec![0.0; n]; // subdiagonal c[i] = A[i+1, i]
    for i in 0..n - 1 {
        e[i] = off[i];
        c[i] = off[i];
    }
    let mut rhs = b.to_vec();
    for i in 0..n - 1 {
        if c[i].abs() > d[i].abs() {
            // swap row i with row i+1
            let (di, ei, fi) = (d[i], e[i], f[i]);
            d[i] = c[i];
            e[i] = d[i + 1];
            f[i] = if i + 1 < n - 1 { e[i + 1] } else { 0.0 };
            // row i+1 receives the old row i
            d[i + 1] = ei;
            if i + 1 < n - 1 {
                e[i + 1] = fi;
            }
            c[i] = di;
            rhs.swap(i, i + 1);
        }
        if d[i] == 0.0 {
            d[i] = 1e-300;
        }
        let m = c[i] / d[i];
        d[i + 1] -= m * e[i];
        if i + 1 < n - 1 {
            e[i + 1] -= m * f[i];
        }
        rhs[i + 1] -= m * rhs[i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = rhs[i];
        if i + 1 < n {
            s -= e[i] * x[i + 1];
        }
        if i + 2 < n {
            s -= f[i] * x[i + 2];
        }
        x[i] = s / d[i];
    }
    x
}

/// Conservative second-order discretization of `-Δ_r + λ_k/r²` on a sector,
/// symmetrized to the flat measure. The origin flux vanishes automatically
/// for d ≥ 2; for d=1 the parity of the sector sets the ghost value.
pub fn kinetic_tridiag(grid: &RadialGrid, k: usize) -> SymTridiag {
    let n = grid.n;
    let h = grid.h;
    let dm1 = grid.dim as i32 - 1;
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n - 1];
    let rp = |i: isize| -> f64 { ((i as f64 + 1.0) * h).powi(dm1) }; // r_{i+1/2}^{d-1}
    for i in 0..n {
        let r_i = grid.node(i).powi(dm1);
        let flux_left = if i == 0 {
            if grid.dim == 1 {
                // ghost u_{-1} = parity·u_0: even parity kills the flux, odd
                // parity contributes 2u_0/h to the divergence
                if sector_parity(k) == 1 {
                    0.0
                } else {
                    2.0
                }
            } else {
                0.0 // r^{d-1} vanishes at the origin
            }
        } else {
            rp(i as isize - 1) / r_i
        };
        let flux_right = rp(i as isize) / r_i; // Dirichlet ghost u_n = 0 at the outer edge
        diag[i] = (flux_left + flux_right) / (h * h) + lambda_k(grid.dim, k) / grid.node(i).powi(2);
        if i + 1 < n {
            let w = (grid.node(i).powi(dm1) * grid.node(i + 1).powi(dm1)).sqrt();
            off[i] = -rp(i as isize) / (h * h * w);
        }
    }
    SymTridiag { diag, off }
}

/// Adds a multiplication operator (diagonal in the symmetrized frame).
pub fn add_diagonal(op: &mut SymTridiag, values: &[f64]) {
    for (d, v) in op.diag.iter_mut().zip(values) {
        *d += v;
    }
}

const FD6_D2: [f64; 7] = [
    2.0 / 180.0,
    -27.0 / 180.0,
    270.0 / 180.0,
    -490.0 / 180.0,
    270.0 / 180.0,
    -27.0 / 180.0,
    2.0 / 180.0,
];
const FD6_D1: [f64; 7] = [
    -1.0 / 60.0,
    9.0 / 60.0,
    -45.0 / 60.0,
    0.0,
    45.0 / 60.0,
    -9.0 / 60.0,
    1.0 / 60.0,
];

/// Sample with parity reflection through the origin and zero padding past
/// the outer edge (the profile tail is below rounding there).
fn sample_reflected(u: &[f64], parity: i32, idx: isize) -> f64 {
    let n = u.len() as isize;
    if idx >= 0 && idx < n {
        u[idx as usize]
    } else if idx < 0 {
        // staggered mirror: node -1-idx sits at -r_{idx}
        let j = -1 - idx;
        if j < n {
            parity as f64 * u[j as usize]
        } else {
            0.0
        }
    } else {
        0.0
    }
}

/// Sixth-order second derivative on the staggered grid with parity ghosts.
pub fn fd6_second_derivative(grid: &RadialGrid, u: &[f64], parity: i32) -> Vec<f64> {
    let n = grid.n;
    let h2 = grid.h * grid.h;
    (0..n as isize)
        .map(|i| {
            let mut s = 0.0;
            for (o, c) in FD6_D2.iter().enumerate() {
                s += c * sample_reflected(u, parity, i + o as isize - 3);
            }
            s / h2
        })
        .collect()
}

/// Sixth-order first derivative on the staggered grid with parity ghosts.
pub fn fd6_first_derivative(grid: &RadialGrid, u: &[f64], parity: i32) -> Vec<f64> {
    let n = grid.n;
    (0..n as isize)
        .map(|i| {
            let mut s = 0.0;
            for (o, c) in FD6_D1.iter().enumerate() {
                s += c * sample_reflected(u, parity, i + o as isize - 3);
            }
            s / grid.h
        })
        .collect()
}

/// Sixth-order action of the sector kinetic operator
/// `-u'' - (d-1)/r·u' + λ_k/r²·u` (no symmetrization; plain samples).
pub fn fd6_kinetic_apply(grid: &RadialGrid, u: &[f64], k: usize) -> Vec<f64> {
    let parity = sector_parity(k);
    let d2 = fd6_second_derivative(grid, u, parity);
    let lam = lambda_k(grid.dim, k);
    if grid.dim == 1 && lam == 0.0 {
        return d2.iter().map(|x| -x).collect();
    }
    let d1 = fd6_first_derivative(grid, u, parity);
    (0..grid.n)
        .map(|i| {
            let r = grid.node(i);
            -d2[i] - (grid.dim as f64 - 1.0) / r * d1[i] + lam / (r * r) * u[i]
        })
        .collect()
}

/// Dense multipole kernel of a radial interaction potential on a sector:
/// the pure kernel values `K_k(r_i, r_j)` (symmetric, no measure) of the
/// angular reduction of `w ↦ W ∗ w` to harmonic `k`. For d=1 the harmonics
/// are the parities: `K = W(r-ρ) ± W(r+ρ)`; for d=2 the angular quadrature
/// `∫ W(√(r²+ρ²-2rρcosθ)) cos(kθ) dθ`.
pub fn multipole_kernel(grid: &RadialGrid, w: &dyn Fn(f64) -> f64, k: usize) -> Vec<f64> {
    let n = grid.n;
    let mut out = vec![0.0; n * n];
    match grid.dim {
        1 => {
            let sign = sector_parity(k) as f64;
            for i in 0..n {
                let ri = grid.node(i);
                for j in i..n {
                    let rj = grid.node(j);
                    let val = w(ri - rj) + sign * w(ri + rj);
                    out[i * n + j] = val;
                    out[j * n + i] = val;
                }
            }
        }
        _ => {
            let m = 128;
            let dth = 2.0 * std::f64::consts::PI / m as f64;
            for i in 0..n {
                let ri = grid.node(i);
                for j in i..n {
                    let rj = grid.node(j);
                    let mut s = 0.0;
                    for q in 0..m {
                        let th = (q as f64 + 0.5) * dth;
                        let dist = (ri * ri + rj * rj - 2.0 * ri * rj * th.cos())
                            .max(0.0)
                            .sqrt();
                        s += w(dist) * (k as f64 * th).cos();
                    }
                    out[i * n + j] = s * dth;
                    out[j * n + i] = s * dth;
                }
            }
        }
    }
    out
}

/// Convolution of a radial sample vector with the sector-0 multipole kernel:
/// realizes `(W ∗ g)(r_i) = h Σ_j K₀(r_i, r_j) r_j^{d-1} g_j` for radial `g`.
pub fn radial_convolution(grid: &RadialGrid, kernel0: &[f64], g: &[f64]) -> Vec<f64> {
    let n = grid.n;
    let dm1 = grid.dim as i32 - 1;
    let weighted: Vec<f64> = (0..n)
        .map(|j| grid.node(j).powi(dm1) * g[j] * grid.h)
        .collect();
    let mut out = vec![0.0; n];
    for i in 0..n {
        let row = &kernel0[i * n..(i + 1) * n];
        out[i] = row.iter().zip(&weighted).map(|(a, b)| a * b).sum();
    }
    out
}

/// Local scalar value of `f(η)` on radial samples, including the Hartree mean
/// field when `kernel0` is supplied.
pub fn f_of_eta(
    spec: &Nonlinearity,
    grid: &RadialGrid,
    eta: &[f64],
    kernel0: Option<&[f64]>,
) -> Vec<f64> {
    let mean = kernel0.map(|k0| {
        let dens: Vec<f64> = eta.iter().map(|e| e * e).collect();
        radial_convolution(grid, k0, &dens)
    });
    eta.iter()
        .enumerate()
        .map(|(i, &e)| {
            let m = mean.as_ref().map_or(0.0, |v| v[i]);
            (spec.h(e * e) + m) * e
        })
        .collect()
}

/// Modified Bessel `K_ν` tail factors for the far field `η ~ C·k_ν(√μ r)`:
/// exact for d=1 (`e^{-z}`) and the large-argument asymptotic series for d=2
/// (`K₀`), which is accurate to ~1e-13 for z ≳ 12 where matching happens.
pub fn tail_value(dim: usize, z: f64) -> f64 {
    match dim {
        1 => (-z).exp(),
        _ => {
            // K₀(z) ~ √(π/2z) e^{-z} [1 + Σ_k (-1)^k a_k z^{-k}],
            // a_k = Π_{j≤k}(2j-1)² / (8^k k!)
            let mut series = 1.0;
            let mut term = 1.0;
            for k in 1..=8 {
                let j = 2.0 * k as f64 - 1.0;
                term *= -(j * j) / (8.0 * k as f64 * z);
                series += term;
            }
            (std::f64::consts::PI / (2.0 * z)).sqrt() * (-z).exp() * series
        }
    }
}

/// Logarithmic derivative of the tail factor (for `η'` in the tail region).
pub fn tail_log_derivative(dim: usize, z: f64) -> f64 {
    match dim {
        1 => -1.0,
        _ => {
            let eps = 1e-4;
            (tail_value(dim, z + eps).ln() - tail_value(dim, z - eps).ln()) / (2.0 * eps)
        }
    }
}
