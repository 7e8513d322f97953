//! Collective spin operators, Kronecker products and the multipole basis.
//!
//! Every matrix here is written in the `S_z` eigenbasis ordered
//! `m = S, S-1, ..., -S`, so index 0 is the fully polarized "up" state.
//! Half-integer angular momenta are passed around as doubled integers.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense complex matrix used for every operator and density matrix.
pub type CMatrix = DMatrix<Complex64>;

pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

/// Length `S` of a collective spin, stored as `2S` so half-integers stay exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SpinLength(u32);

impl SpinLength {
    pub fn from_twice(two_s: u32) -> Result<Self> {
        if two_s == 0 {
            return Err(Error::InvalidSpin(0.0));
        }
        Ok(SpinLength(two_s))
    }

    /// Accepts values such as `0.5`, `1`, `1.5`.
    pub fn new(s: f64) -> Result<Self> {
        let twice = 2.0 * s;
        if !twice.is_finite() || twice < 1.0 || (twice - twice.round()).abs() > 1e-9 {
            return Err(Error::InvalidSpin(s));
        }
        Self::from_twice(twice.round() as u32)
    }

    pub fn twice(self) -> u32 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    /// Hilbert-space dimension `2S + 1`.
    pub fn dim(self) -> usize {
        self.0 as usize + 1
    }

    /// Magnetic quantum numbers in basis order, `S` first.
    pub fn m_values(self) -> impl Iterator<Item = f64> {
        let s = self.value();
        (0..self.dim()).map(move |i| s - i as f64)
    }
}

impl TryFrom<f64> for SpinLength {
    type Error = Error;
    fn try_from(s: f64) -> Result<Self> {
        SpinLength::new(s)
    }
}

impl From<SpinLength> for f64 {
    fn from(s: SpinLength) -> f64 {
        s.value()
    }
}

impl std::fmt::Display for SpinLength {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.0 % 2 == 0 {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

/// `S+`, `S-`, `Sx`, `Sy`, `Sz` for one spin.
#[derive(Clone, Debug)]
pub struct SpinMatrices {
    pub plus: CMatrix,
    pub minus: CMatrix,
    pub x: CMatrix,
    pub y: CMatrix,
    pub z: CMatrix,
}

pub fn spin_matrices(s: SpinLength) -> SpinMatrices {
    let d = s.dim();
    let sv = s.value();
    let m: Vec<f64> = s.m_values().collect();

    let mut plus = CMatrix::zeros(d, d);
    for i in 1..d {
        plus[(i - 1, i)] = Complex64::from((sv * (sv + 1.0) - m[i] * (m[i] + 1.0)).sqrt());
    }
    let minus = plus.adjoint();
    let x = (&plus + &minus).unscale(2.0);
    let y = (&plus - &minus) * (-0.5 * I);
    let z = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        d,
        m.iter().map(|&mi| Complex64::from(mi)),
    ));
    SpinMatrices { plus, minus, x, y, z }
}

/// Kronecker product; `a` acts on the left (site A) factor.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Largest entry-wise deviation from Hermiticity.
pub fn hermiticity_error(m: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

/// Spin rotation `exp(-i phi Sz) exp(-i theta Sy)`, which carries the
/// north pole to the direction `(theta, phi)`.
pub fn spin_rotation(s: SpinLength, theta: f64, phi: f64) -> CMatrix {
    let ops = spin_matrices(s);
    let eig = nalgebra::SymmetricEigen::new(ops.y.clone());
    let phases = eig.eigenvalues.map(|ev| Complex64::from_polar(1.0, -theta * ev));
    let about_y = &eig.eigenvectors * CMatrix::from_diagonal(&phases) * eig.eigenvectors.adjoint();
    let about_z = CMatrix::from_diagonal(
        &ops.z.diagonal().map(|mz| Complex64::from_polar(1.0, -phi * mz.re)),
    );
    about_z * about_y
}

fn factorial(n: i32) -> f64 {
    debug_assert!(n >= 0);
    (2..=n).fold(1.0, |acc, k| acc * k as f64)
}

fn check_pair(tj: i32, tm: i32) -> Result<()> {
    if tj < 0 || tm.abs() > tj || (tj + tm) % 2 != 0 {
        return Err(Error::domain(format!(
            "invalid angular momentum pair j = {}/2, m = {}/2",
            tj, tm
        )));
    }
    Ok(())
}

/// Clebsch–Gordan coefficient `<j1 m1; j2 m2 | J M>` in the Condon–Shortley
/// convention, evaluated with the Racah sum.
///
/// All arguments are doubled (`2j`, `2m`), so `clebsch_gordan(1, 1, 1, -1, 0, 0)`
/// is `<1/2 1/2; 1/2 -1/2 | 0 0> = 1/sqrt(2)`.
pub fn clebsch_gordan(tj1: i32, tm1: i32, tj2: i32, tm2: i32, tj: i32, tm: i32) -> Result<f64> {
    check_pair(tj1, tm1)?;
    check_pair(tj2, tm2)?;
    check_pair(tj, tm)?;
    if (tj1 + tj2 + tj) % 2 != 0 {
        return Err(Error::domain(format!(
            "J = {}/2 cannot couple j1 = {}/2 and j2 = {}/2",
            tj, tj1, tj2
        )));
    }
    if tm != tm1 + tm2 || tj < (tj1 - tj2).abs() || tj > tj1 + tj2 {
        return Ok(0.0);
    }

    // Every combination below is an integer once the parity checks pass.
    let h = |twice: i32| twice / 2;
    let j1pj2mj = h(tj1 + tj2 - tj);
    let j1mm1 = h(tj1 - tm1);
    let j2pm2 = h(tj2 + tm2);
    let jmj2pm1 = h(tj - tj2 + tm1);
    let jmj1mm2 = h(tj - tj1 - tm2);

    let prefactor = ((tj + 1) as f64
        * factorial(h(tj + tj1 - tj2))
        * factorial(h(tj - tj1 + tj2))
        * factorial(j1pj2mj)
        / factorial(h(tj1 + tj2 + tj) + 1))
        .sqrt()
        * (factorial(h(tj + tm))
            * factorial(h(tj - tm))
            * factorial(j1mm1)
            * factorial(h(tj1 + tm1))
            * factorial(h(tj2 - tm2))
            * factorial(j2pm2))
        .sqrt();

    let k_min = 0.max(-jmj2pm1).max(-jmj1mm2);
    let k_max = j1pj2mj.min(j1mm1).min(j2pm2);
    let mut sum = 0.0;
    for k in k_min..=k_max {
        let denom = factorial(k)
            * factorial(j1pj2mj - k)
            * factorial(j1mm1 - k)
            * factorial(j2pm2 - k)
            * factorial(jmj2pm1 + k)
            * factorial(jmj1mm2 + k);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign / denom;
    }
    Ok(prefactor * sum)
}

/// Irreducible tensor operator `T_lm` for spin `S`, with
/// `(T_lm)_{m', m''} = sqrt((2l+1)/(2S+1)) <S m''; l m | S m'>`.
///
/// The set `{T_lm : 0 <= l <= 2S}` is orthonormal under `Tr[A^dagger B]`.
pub fn tensor_operator(s: SpinLength, l: i32, m: i32) -> Result<CMatrix> {
    let ts = s.twice() as i32;
    if l < 0 || l > ts || m.abs() > l {
        return Err(Error::domain(format!(
            "tensor operator T_({l},{m}) out of range for S = {s}"
        )));
    }
    let d = s.dim();
    let norm = ((2 * l + 1) as f64 / d as f64).sqrt();
    let mut t = CMatrix::zeros(d, d);
    for row in 0..d {
        let tm_row = ts - 2 * row as i32;
        for col in 0..d {
            let tm_col = ts - 2 * col as i32;
            if tm_row != tm_col + 2 * m {
                continue;
            }
            let cg = clebsch_gordan(ts, tm_col, 2 * l, 2 * m, ts, tm_row)?;
            t[(row, col)] = Complex64::from(norm * cg);
        }
    }
    Ok(t)
}

/// All `T_lm` for `l = 0..=2S`, `m = -l..=l`, in that order.
pub fn multipole_basis(s: SpinLength) -> Vec<((i32, i32), CMatrix)> {
    let lmax = s.twice() as i32;
    let mut out = Vec::with_capacity(s.dim() * s.dim());
    for l in 0..=lmax {
        for m in -l..=l {
            let t = tensor_operator(s, l, m).expect("indices in range");
            out.push(((l, m), t));
        }
    }
    out
}
