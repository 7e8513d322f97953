//! SU(2) spin Wigner functions on a Gauss–Legendre × uniform sphere grid.
//!
//! The kernel is `Δ(θ, φ) = sqrt((2S+1)/4π) Σ_lm Y*_lm(θ, φ) T_lm`, scaled so
//! that `∫ W dΩ = 1` for every unit-trace state. Relative to the unnormalized
//! sum `Σ Y*_lm T_lm` the constant is `sqrt((2S+1)/4π)`; with it the overlap
//! identity reads `∫ W_ρ W_σ dΩ = (2S+1)/(4π) Tr[ρσ]`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liouville::DensityMatrix;
use crate::spin_ops::{multipole_basis, CMatrix, SpinLength};

/// Largest tolerated imaginary part of a Wigner value before it is dropped.
pub const IMAGINARY_TOL: f64 = 1e-10;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes in decreasing order.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // P_n(x) and P_n'(x) by the three-term recurrence
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes.push(x);
        weights.push(2.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

/// Orthonormal associated Legendre functions `sqrt((2l+1)/4π (l-m)!/(l+m)!) P_l^m(cos θ)`
/// with the Condon–Shortley phase, for `0 <= m <= l <= lmax`; entry `[l][m]`.
fn legendre_table(lmax: usize, theta: f64) -> Vec<Vec<f64>> {
    let (x, sin) = (theta.cos(), theta.sin());
    let mut p = vec![vec![0.0; lmax + 1]; lmax + 1];
    p[0][0] = (1.0 / (4.0 * PI)).sqrt();
    for m in 1..=lmax {
        p[m][m] = -((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * sin * p[m - 1][m - 1];
    }
    for m in 0..lmax {
        p[m + 1][m] = ((2 * m + 3) as f64).sqrt() * x * p[m][m];
    }
    for m in 0..=lmax {
        for l in (m + 2)..=lmax {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
            p[l][m] = a * (x * p[l - 1][m] - b * p[l - 2][m]);
        }
    }
    p
}

/// `Y_lm(θ, φ)` in the physics convention (Condon–Shortley phase).
pub fn spherical_harmonic(l: usize, m: i32, theta: f64, phi: f64) -> Complex64 {
    let am = m.unsigned_abs() as usize;
    if am > l {
        return Complex64::from(0.0);
    }
    let y = legendre_table(l, theta)[l][am] * Complex64::from_polar(1.0, am as f64 * phi);
    if m >= 0 {
        y
    } else if am % 2 == 0 {
        y.conj()
    } else {
        -y.conj()
    }
}

/// Hermitian kernel `Δ(θ, φ)` with `W_ρ(θ, φ) = Tr[ρ Δ(θ, φ)]`.
pub fn wigner_kernel(s: SpinLength, theta: f64, phi: f64) -> CMatrix {
    let d = s.dim();
    let scale = (d as f64 / (4.0 * PI)).sqrt();
    let mut k = CMatrix::zeros(d, d);
    for ((l, m), t) in multipole_basis(s) {
        k += t * (spherical_harmonic(l as usize, m, theta, phi).conj() * scale);
    }
    k
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n_theta: usize,
    pub n_phi: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { n_theta: 64, n_phi: 128 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridPeak {
    pub theta: f64,
    pub phi: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WignerGrid {
    /// Polar angles, increasing (Gauss–Legendre nodes in `cos θ`).
    pub thetas: Vec<f64>,
    /// Quadrature weights in `cos θ` matching `thetas`.
    pub theta_weights: Vec<f64>,
    /// `2π j / n_phi`.
    pub phis: Vec<f64>,
    /// `values[(i, j)] = W(thetas[i], phis[j])`.
    pub values: DMatrix<f64>,
}

/// Evaluates `W_ρ` for a single-site state on the grid.
pub fn wigner_function(rho: &DensityMatrix, s: SpinLength, grid: &GridSpec) -> Result<WignerGrid> {
    let d = s.dim();
    if rho.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: rho.dim() });
    }
    if grid.n_theta == 0 || grid.n_phi == 0 {
        return Err(Error::domain("Wigner grid needs at least one point per axis"));
    }
    let lmax = s.twice() as usize;
    let scale = (d as f64 / (4.0 * PI)).sqrt();
    // moments[l][m] = Tr[ρ T_lm] for m >= 0; negative m follow by conjugation
    let mut moments = vec![vec![Complex64::from(0.0); lmax + 1]; lmax + 1];
    for ((l, m), t) in multipole_basis(s) {
        if m >= 0 {
            moments[l as usize][m as usize] = rho.expectation(&t);
        }
    }

    let (nodes, weights) = gauss_legendre(grid.n_theta);
    let thetas: Vec<f64> = nodes.iter().map(|x| x.clamp(-1.0, 1.0).acos()).collect();
    let phis: Vec<f64> = (0..grid.n_phi).map(|j| 2.0 * PI * j as f64 / grid.n_phi as f64).collect();
    let mut values = DMatrix::zeros(grid.n_theta, grid.n_phi);
    for (i, &theta) in thetas.iter().enumerate() {
        let p = legendre_table(lmax, theta);
        for (j, &phi) in phis.iter().enumerate() {
            let mut w = Complex64::from(0.0);
            for l in 0..=lmax {
                w += p[l][0] * moments[l][0];
                for m in 1..=l {
                    // the ±m terms are complex conjugates of each other
                    let term = p[l][m] * Complex64::from_polar(1.0, -(m as f64) * phi) * moments[l][m];
                    w += 2.0 * term.re;
                }
            }
            if w.im.abs() > IMAGINARY_TOL {
                return Err(Error::domain(format!("Wigner value has imaginary part {:.3e}", w.im)));
            }
            values[(i, j)] = scale * w.re;
        }
    }
    Ok(WignerGrid { thetas, theta_weights: weights, phis, values })
}

impl WignerGrid {
    fn phi_weight(&self) -> f64 {
        2.0 * PI / self.phis.len() as f64
    }

    /// Quadrature of `f(W)` over the sphere.
    fn quadrature(&self, f: impl Fn(usize, usize) -> f64) -> f64 {
        let mut total = 0.0;
        for (i, w) in self.theta_weights.iter().enumerate() {
            let row: f64 = (0..self.phis.len()).map(|j| f(i, j)).sum();
            total += w * row;
        }
        total * self.phi_weight()
    }

    /// `∫ W dΩ`.
    pub fn integral(&self) -> f64 {
        self.quadrature(|i, j| self.values[(i, j)])
    }

    /// `∫ W_self W_other dΩ`; both grids must share the same layout.
    pub fn overlap(&self, other: &WignerGrid) -> Result<f64> {
        if self.values.shape() != other.values.shape() {
            return Err(Error::DimensionMismatch { expected: self.values.len(), got: other.values.len() });
        }
        Ok(self.quadrature(|i, j| self.values[(i, j)] * other.values[(i, j)]))
    }

    pub fn max(&self) -> f64 {
        self.values.max()
    }

    pub fn min(&self) -> f64 {
        self.values.min()
    }

    /// `max W - min W`.
    pub fn contrast(&self) -> f64 {
        self.max() - self.min()
    }

    /// Grid neighbours of `(i, j)`: the surrounding 8 cells, periodic in φ,
    /// continuing across the poles onto the opposite meridian.
    fn neighbours(&self, i: usize, j: usize) -> Vec<(usize, usize)> {
        let (nt, np) = (self.thetas.len() as isize, self.phis.len() as isize);
        let mut out = Vec::with_capacity(8);
        for di in -1isize..=1 {
            for dj in -1isize..=1 {
                if di == 0 && dj == 0 {
                    continue;
                }
                let mut ni = i as isize + di;
                let mut nj = j as isize + dj;
                if ni < 0 || ni >= nt {
                    ni = ni.clamp(0, nt - 1);
                    nj += np / 2;
                }
                let cell = (ni as usize, nj.rem_euclid(np) as usize);
                if cell != (i, j) && !out.contains(&cell) {
                    out.push(cell);
                }
            }
        }
        out
    }

    /// Local maxima above `threshold`. A flat plateau of equal values (for
    /// instance a ring around a pole) counts once, located at its first cell.
    pub fn local_maxima(&self, threshold: f64) -> Vec<GridPeak> {
        let (nt, np) = (self.thetas.len(), self.phis.len());
        let eps = 1e-12 * self.values.amax().max(1e-300);
        let mut visited = vec![false; nt * np];
        let mut peaks = Vec::new();
        for i in 0..nt {
            for j in 0..np {
                let v0 = self.values[(i, j)];
                if visited[i * np + j] || v0 <= threshold {
                    continue;
                }
                let mut stack = vec![(i, j)];
                visited[i * np + j] = true;
                let mut is_peak = true;
                while let Some((ci, cj)) = stack.pop() {
                    for (ni, nj) in self.neighbours(ci, cj) {
                        let v = self.values[(ni, nj)];
                        if v > v0 + eps {
                            is_peak = false;
                        } else if (v - v0).abs() <= eps && !visited[ni * np + nj] {
                            visited[ni * np + nj] = true;
                            stack.push((ni, nj));
                        }
                    }
                }
                if is_peak {
                    peaks.push(GridPeak { theta: self.thetas[i], phi: self.phis[j], value: v0 });
                }
            }
        }
        peaks
    }

    /// Local maxima rising above the isotropic value `1/(4π)`, ignoring
    /// interference ripples of a strongly peaked distribution.
    pub fn significant_maxima(&self) -> Vec<GridPeak> {
        self.local_maxima(1.0 / (4.0 * PI))
    }
}
