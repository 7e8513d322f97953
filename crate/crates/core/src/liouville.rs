//! Vectorized Lindblad generator, exact steady states and observables.
//!
//! Density matrices are vectorized by stacking columns: `rho[(i, j)]` sits
//! at index `i + j d`, which is also the memory order of [`CMatrix`]. With
//! this convention `vec(A X B) = (B^T ⊗ A) vec(X)` and the generator reads
//!
//! ```text
//! L = -i (I ⊗ H - H^T ⊗ I)
//!     + Σ_k r_k [ O_k^* ⊗ O_k - ½ I ⊗ O_k^†O_k - ½ (O_k^†O_k)^T ⊗ I ]
//! ```

use std::ops::ControlFlow;

use faer::linalg::solvers::Solve;
use faer::{c64, Mat};
use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::LindbladSpec;
use crate::ode::{Dopri5, Tolerances};
use crate::spin_ops::{hermiticity_error, identity, kron, spin_matrices, CMatrix, SpinLength, I};

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = -1e-8;
/// Bordered systems with a smaller singular value signal a non-unique steady state.
pub const DEGENERACY_TOL: f64 = 1e-8;

/// Hermitian, unit-trace, numerically positive matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    /// Validates the density-matrix invariants.
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
        }
        let herr = hermiticity_error(&m);
        if herr > HERMITIAN_TOL {
            return Err(Error::domain(format!("density matrix not Hermitian (error {herr:.3e})")));
        }
        let tr = m.trace();
        if (tr - Complex64::from(1.0)).norm() > TRACE_TOL {
            return Err(Error::domain(format!("density matrix trace is {tr}")));
        }
        let rho = DensityMatrix(m);
        let min_ev = rho.min_eigenvalue();
        if min_ev < POSITIVITY_TOL {
            return Err(Error::domain(format!("density matrix has eigenvalue {min_ev:.3e}")));
        }
        Ok(rho)
    }

    /// Hermitizes `(m + m^†)/2` and then validates.
    pub fn hermitized(m: CMatrix) -> Result<Self> {
        let h = (&m + m.adjoint()).unscale(2.0);
        Self::new(h)
    }

    pub fn maximally_mixed(d: usize) -> Self {
        DensityMatrix(identity(d).unscale(d as f64))
    }

    /// `|psi><psi|` for a normalized `psi`.
    pub fn pure(psi: &nalgebra::DVector<Complex64>) -> Result<Self> {
        let n = psi.norm();
        let v = psi.unscale(n);
        Self::new(&v * v.adjoint())
    }

    /// Product basis state of the dimer, indices counted from the "up" end.
    pub fn basis_state(d: usize, index: usize) -> Self {
        let mut m = CMatrix::zeros(d, d);
        m[(index, index)] = Complex64::from(1.0);
        DensityMatrix(m)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn purity(&self) -> f64 {
        (&self.0 * &self.0).trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.0.clone()).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn expectation(&self, op: &CMatrix) -> Complex64 {
        (&self.0 * op).trace()
    }

    pub fn max_distance(&self, other: &DensityMatrix) -> f64 {
        (&self.0 - &other.0).iter().fold(0.0f64, |a, z| a.max(z.norm()))
    }
}

/// Compressed-row storage of the generator.
#[derive(Clone, Debug)]
struct Csr {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl Csr {
    fn from_triplets(n: usize, mut t: Vec<(usize, usize, Complex64)>) -> Self {
        t.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(t.len());
        let mut vals: Vec<Complex64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Csr { row_ptr, cols, vals }
    }
}

/// The generator `L` acting on column-stacked density matrices.
#[derive(Clone, Debug)]
pub struct Liouvillian {
    hilbert_dim: usize,
    csr: Csr,
}

fn nonzeros(m: &CMatrix) -> Vec<(usize, usize, Complex64)> {
    let mut out = Vec::new();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if v != Complex64::from(0.0) {
                out.push((i, j, v));
            }
        }
    }
    out
}

pub fn build_liouvillian(spec: &LindbladSpec) -> Result<Liouvillian> {
    let n = spec.dim();
    for jump in &spec.jumps {
        if jump.operator.shape() != (n, n) {
            return Err(Error::DimensionMismatch { expected: n, got: jump.operator.nrows() });
        }
    }
    // Effective non-Hermitian generator K = -iH - ½ Σ r O^†O, so that
    // L rho = K rho + rho K^† + Σ r O rho O^†.
    let mut k = &spec.hamiltonian * (-I);
    for jump in &spec.jumps {
        k -= (jump.operator.adjoint() * &jump.operator) * Complex64::from(0.5 * jump.rate);
    }
    let idx = |i: usize, j: usize| i + j * n;
    let mut triplets = Vec::new();
    for (i, kk, v) in nonzeros(&k) {
        for j in 0..n {
            // (K rho)_ij = K_ik rho_kj
            triplets.push((idx(i, j), idx(kk, j), v));
            // (rho K^†)_ji = rho_jk conj(K_ik)
            triplets.push((idx(j, i), idx(j, kk), v.conj()));
        }
    }
    for jump in &spec.jumps {
        if jump.rate == 0.0 {
            continue;
        }
        let nz = nonzeros(&jump.operator);
        for &(i, kk, a) in &nz {
            for &(j, l, b) in &nz {
                // (O rho O^†)_ij = O_ik rho_kl conj(O_jl)
                triplets.push((idx(i, j), idx(kk, l), a * b.conj() * jump.rate));
            }
        }
    }
    Ok(Liouvillian { hilbert_dim: n, csr: Csr::from_triplets(n * n, triplets) })
}

impl Liouvillian {
    /// Liouville-space dimension `d^2`.
    pub fn dim(&self) -> usize {
        self.hilbert_dim * self.hilbert_dim
    }

    pub fn hilbert_dim(&self) -> usize {
        self.hilbert_dim
    }

    pub fn nnz(&self) -> usize {
        self.csr.vals.len()
    }

    pub fn apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        for r in 0..self.dim() {
            let mut acc = Complex64::from(0.0);
            for p in self.csr.row_ptr[r]..self.csr.row_ptr[r + 1] {
                acc += self.csr.vals[p] * x[self.csr.cols[p]];
            }
            out[r] = acc;
        }
    }

    /// `L rho` as a matrix.
    pub fn apply_matrix(&self, rho: &CMatrix) -> CMatrix {
        let d = self.hilbert_dim;
        let mut out = CMatrix::zeros(d, d);
        self.apply(rho.as_slice(), out.as_mut_slice());
        out
    }

    pub fn to_dense(&self) -> Mat<c64> {
        let n = self.dim();
        let mut m = Mat::<c64>::zeros(n, n);
        for r in 0..n {
            for p in self.csr.row_ptr[r]..self.csr.row_ptr[r + 1] {
                m[(r, self.csr.cols[p])] = self.csr.vals[p];
            }
        }
        m
    }

    /// Largest `|Σ_i L[(i,i), k]|`: zero when the generator preserves trace.
    pub fn trace_defect(&self) -> f64 {
        let d = self.hilbert_dim;
        let mut col_sums = vec![Complex64::from(0.0); self.dim()];
        for i in 0..d {
            let r = i + i * d;
            for p in self.csr.row_ptr[r]..self.csr.row_ptr[r + 1] {
                col_sums[self.csr.cols[p]] += self.csr.vals[p];
            }
        }
        col_sums.iter().fold(0.0f64, |a, z| a.max(z.norm()))
    }

    /// Full spectrum by dense diagonalization (desk-scale sizes only).
    pub fn spectrum(&self) -> Result<Vec<Complex64>> {
        self.to_dense().eigenvalues().map_err(|e| Error::LinearAlgebra(format!("{e:?}")))
    }

    /// Singular values in non-increasing order (desk-scale sizes only).
    pub fn singular_values(&self) -> Result<Vec<f64>> {
        self.to_dense().singular_values().map_err(|e| Error::LinearAlgebra(format!("{e:?}")))
    }

    /// Bytes needed by a dense steady-state solve (matrix plus factorization).
    pub fn dense_solve_bytes(&self) -> usize {
        dense_solve_bytes(self.hilbert_dim)
    }
}

pub fn dense_solve_bytes(hilbert_dim: usize) -> usize {
    let n = hilbert_dim * hilbert_dim;
    2 * n * n * std::mem::size_of::<c64>()
}

#[derive(Clone, Debug)]
pub struct SteadyState {
    pub rho: DensityMatrix,
    /// `max |L vec(rho)|` of the Hermitized result.
    pub residual: f64,
    /// Estimated smallest singular value of the bordered system.
    pub sigma_min: f64,
}

fn col_norm(x: &Mat<c64>) -> f64 {
    (0..x.nrows()).map(|i| x[(i, 0)].norm_sqr()).sum::<f64>().sqrt()
}

/// Solves `L vec(rho) = 0`, `Tr rho = 1` by replacing the first (population)
/// row of `L` with the trace functional and factorizing the result.
pub fn steady_state(l: &Liouvillian) -> Result<SteadyState> {
    let d = l.hilbert_dim();
    let n = l.dim();
    let mut a = l.to_dense();
    for c in 0..n {
        a[(0, c)] = c64::new(0.0, 0.0);
    }
    for i in 0..d {
        a[(0, i + i * d)] = c64::new(1.0, 0.0);
    }
    let lu = a.partial_piv_lu();
    drop(a);

    let mut b = Mat::<c64>::zeros(n, 1);
    b[(0, 0)] = c64::new(1.0, 0.0);
    let x = lu.solve(&b);
    if (0..n).any(|i| !x[(i, 0)].re.is_finite() || !x[(i, 0)].im.is_finite()) {
        return Err(Error::DegenerateSteadyState { sigma_min: 0.0 });
    }

    // inverse iteration on (A^† A)^{-1} for the smallest singular value
    let mut v = Mat::<c64>::from_fn(n, 1, |i, _| c64::new(1.0 + ((i * 7919) % 13) as f64 / 13.0, 0.0));
    let mut growth = 0.0;
    for _ in 0..8 {
        let nv = col_norm(&v);
        for i in 0..n {
            v[(i, 0)] /= nv;
        }
        let w = lu.solve_adjoint(&v);
        let z = lu.solve(&w);
        growth = col_norm(&z);
        v = z;
    }
    let sigma_min = if growth.is_finite() && growth > 0.0 { 1.0 / growth.sqrt() } else { 0.0 };
    if sigma_min < DEGENERACY_TOL {
        return Err(Error::DegenerateSteadyState { sigma_min });
    }

    let raw = CMatrix::from_fn(d, d, |i, j| x[(i + j * d, 0)]);
    let herm = (&raw + raw.adjoint()).unscale(2.0);
    let tr = herm.trace();
    let herm = herm.unscale(tr.re);
    let residual = l.apply_matrix(&herm).iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
    let rho = DensityMatrix::new(herm)?;
    Ok(SteadyState { rho, residual, sigma_min })
}

/// Integrates `d rho/dt = L rho` from `rho0` to `t_final`.
pub fn evolve(spec: &LindbladSpec, rho0: &DensityMatrix, t_final: f64, tol: Tolerances) -> Result<DensityMatrix> {
    if rho0.dim() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), got: rho0.dim() });
    }
    if !(t_final >= 0.0) {
        return Err(Error::domain(format!("t_final must be non-negative, got {t_final}")));
    }
    if t_final == 0.0 {
        return Ok(rho0.clone());
    }
    let l = build_liouvillian(spec)?;
    let n = l.dim();
    let mut y0 = vec![0.0; 2 * n];
    for (k, z) in rho0.matrix().iter().enumerate() {
        y0[k] = z.re;
        y0[n + k] = z.im;
    }
    let mut x = vec![Complex64::from(0.0); n];
    let mut lx = vec![Complex64::from(0.0); n];
    let sol = Dopri5::new(tol).solve(
        |_, y, dy| {
            for k in 0..n {
                x[k] = Complex64::new(y[k], y[n + k]);
            }
            l.apply(&x, &mut lx);
            for k in 0..n {
                dy[k] = lx[k].re;
                dy[n + k] = lx[k].im;
            }
        },
        0.0,
        &y0,
        t_final,
        None,
        |_| ControlFlow::Continue(()),
    )?;
    let d = spec.dim();
    let m = CMatrix::from_fn(d, d, |i, j| Complex64::new(sol.y[i + j * d], sol.y[n + i + j * d]));
    DensityMatrix::hermitized(m)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub za: f64,
    pub zb: f64,
    pub xa: f64,
    pub xb: f64,
    pub ya: f64,
    pub yb: f64,
    pub purity: f64,
}

fn check_dimer_dim(rho: &DensityMatrix, s: SpinLength) -> Result<()> {
    let expected = s.dim() * s.dim();
    if rho.dim() != expected {
        return Err(Error::DimensionMismatch { expected, got: rho.dim() });
    }
    Ok(())
}

/// Normalized magnetizations `<S_a^site> / S` and the purity `Tr rho^2`.
pub fn observables(rho: &DensityMatrix, s: SpinLength) -> Result<Observables> {
    check_dimer_dim(rho, s)?;
    let ops = spin_matrices(s);
    let id = identity(s.dim());
    let sv = s.value();
    let on_a = |op: &CMatrix| rho.expectation(&kron(op, &id)).re / sv;
    let on_b = |op: &CMatrix| rho.expectation(&kron(&id, op)).re / sv;
    Ok(Observables {
        za: on_a(&ops.z),
        zb: on_b(&ops.z),
        xa: on_a(&ops.x),
        xb: on_b(&ops.x),
        ya: on_a(&ops.y),
        yb: on_b(&ops.y),
        purity: rho.purity(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Site {
    A,
    B,
}

impl std::str::FromStr for Site {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(Site::A),
            "B" | "b" => Ok(Site::B),
            other => Err(Error::Config(format!("unknown site {other:?} (expected A or B)"))),
        }
    }
}

/// Reduced density matrix of one site.
pub fn partial_trace(rho: &DensityMatrix, keep: Site, s: SpinLength) -> Result<DensityMatrix> {
    check_dimer_dim(rho, s)?;
    let d = s.dim();
    let m = rho.matrix();
    let reduced = match keep {
        Site::A => CMatrix::from_fn(d, d, |a, ap| (0..d).map(|b| m[(a * d + b, ap * d + b)]).sum()),
        Site::B => CMatrix::from_fn(d, d, |b, bp| (0..d).map(|a| m[(a * d + b, a * d + bp)]).sum()),
    };
    DensityMatrix::hermitized(reduced)
}
