//! Hamiltonians and jump operators for the PT dimer, the single dissipative
//! LMG spin and the full LMG dimer.
//!
//! Dimer operators live on `site A (x) site B`, site A being the left
//! Kronecker factor. Jump rates are kept apart from the operators: a jump
//! `(O, r)` contributes `r * D[O]` to the master equation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin_ops::{hermiticity_error, identity, kron, spin_matrices, CMatrix, SpinLength};

const HERMITIAN_TOL: f64 = 1e-12;

/// Couplings in units of the field `g`, plus the spin length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub g: f64,
    /// LMG nonlinearity `J`.
    pub j: f64,
    /// Inter-spin coupling.
    pub lambda: f64,
    pub gamma: f64,
    pub spin: SpinLength,
}

impl ModelParams {
    pub fn new(g: f64, j: f64, lambda: f64, gamma: f64, spin: SpinLength) -> Result<Self> {
        let p = ModelParams { g, j, lambda, gamma, spin };
        p.validate()?;
        Ok(p)
    }

    /// `g = 1` and the given `(J, lambda, gamma)`.
    pub fn unit_field(j: f64, lambda: f64, gamma: f64, spin: SpinLength) -> Result<Self> {
        Self::new(1.0, j, lambda, gamma, spin)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("g", self.g), ("J", self.j), ("lambda", self.lambda), ("gamma", self.gamma)] {
            if !v.is_finite() {
                return Err(Error::domain(format!("{name} must be finite, got {v}")));
            }
        }
        // g = 0 is allowed so the bare PT model is reachable through the dimer builder.
        if self.g < 0.0 {
            return Err(Error::domain(format!("g must be non-negative, got {}", self.g)));
        }
        if self.gamma < 0.0 {
            return Err(Error::domain(format!("gamma must be non-negative, got {}", self.gamma)));
        }
        Ok(())
    }

    pub fn with_couplings(&self, j: f64, lambda: f64) -> Self {
        ModelParams { j, lambda, ..*self }
    }
}

#[derive(Clone, Debug)]
pub struct Jump {
    pub operator: CMatrix,
    pub rate: f64,
}

/// Hamiltonian and rate-weighted jump operators of a Lindblad master equation.
#[derive(Clone, Debug)]
pub struct LindbladSpec {
    pub hamiltonian: CMatrix,
    pub jumps: Vec<Jump>,
}

impl LindbladSpec {
    pub fn new(hamiltonian: CMatrix, jumps: Vec<Jump>) -> Result<Self> {
        let d = hamiltonian.nrows();
        if hamiltonian.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: hamiltonian.ncols() });
        }
        let herr = hermiticity_error(&hamiltonian);
        if herr > HERMITIAN_TOL {
            return Err(Error::domain(format!("Hamiltonian is not Hermitian (error {herr:.3e})")));
        }
        for jump in &jumps {
            if jump.operator.nrows() != d || jump.operator.ncols() != d {
                return Err(Error::DimensionMismatch { expected: d, got: jump.operator.nrows() });
            }
            if !(jump.rate >= 0.0 && jump.rate.is_finite()) {
                return Err(Error::domain(format!("jump rate must be non-negative, got {}", jump.rate)));
            }
        }
        Ok(LindbladSpec { hamiltonian, jumps })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::domain(format!("gamma must be non-negative, got {gamma}")));
    }
    Ok(())
}

fn lmg_hamiltonian(j: f64, g: f64, s: SpinLength) -> CMatrix {
    let ops = spin_matrices(s);
    let sv = s.value();
    (&ops.x * &ops.x) * Complex64::from(-j / sv) - ops.z * Complex64::from(g)
}

fn pt_coupling(lambda: f64, s: SpinLength) -> CMatrix {
    let ops = spin_matrices(s);
    let hop = kron(&ops.plus, &ops.minus) + kron(&ops.minus, &ops.plus);
    hop * Complex64::from(lambda / (2.0 * s.value()))
}

/// Loss on site A, gain on site B, both at rate `gamma / S`.
fn dimer_jumps(gamma: f64, s: SpinLength) -> Vec<Jump> {
    let ops = spin_matrices(s);
    let id = identity(s.dim());
    let rate = gamma / s.value();
    vec![
        Jump { operator: kron(&ops.minus, &id), rate },
        Jump { operator: kron(&id, &ops.plus), rate },
    ]
}

/// PT dimer: `H = lambda (S+_A S-_B + S-_A S+_B) / 2S`.
pub fn build_pt_model(lambda: f64, gamma: f64, s: SpinLength) -> Result<LindbladSpec> {
    check_gamma(gamma)?;
    LindbladSpec::new(pt_coupling(lambda, s), dimer_jumps(gamma, s))
}

/// Single dissipative LMG spin: `H = -J Sx^2 / S - g Sz`, decay `S-` at `gamma / S`.
pub fn build_lmg_model(j: f64, g: f64, gamma: f64, s: SpinLength) -> Result<LindbladSpec> {
    check_gamma(gamma)?;
    let ops = spin_matrices(s);
    LindbladSpec::new(
        lmg_hamiltonian(j, g, s),
        vec![Jump { operator: ops.minus, rate: gamma / s.value() }],
    )
}

/// Full dimer: an LMG Hamiltonian on each site sharing `(J, g)` plus the PT
/// coupling, with the PT dimer's gain/loss jumps.
pub fn build_dimer_model(params: &ModelParams) -> Result<LindbladSpec> {
    params.validate()?;
    let s = params.spin;
    let id = identity(s.dim());
    let local = lmg_hamiltonian(params.j, params.g, s);
    let h = kron(&local, &id) + kron(&id, &local) + pt_coupling(params.lambda, s);
    LindbladSpec::new(h, dimer_jumps(params.gamma, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin_ops::max_abs;
    use proptest::prelude::*;

    fn spin(ts: u32) -> SpinLength {
        SpinLength::from_twice(ts).unwrap()
    }

    #[test]
    fn pt_model_without_coupling_has_zero_hamiltonian() {
        let spec = build_pt_model(0.0, 0.3, spin(2)).unwrap();
        assert_eq!(max_abs(&spec.hamiltonian), 0.0);
        assert_eq!(spec.jumps.len(), 2);
        assert!((spec.jumps[0].rate - 0.3).abs() < 1e-15);
    }

    #[test]
    fn pt_model_spin_half_hopping() {
        // basis |uu>, |ud>, |du>, |dd>; only |ud> <-> |du> couple, amplitude lambda/(2S) * 1
        let spec = build_pt_model(1.0, 0.5, spin(1)).unwrap();
        let h = &spec.hamiltonian;
        for i in 0..4 {
            for j in 0..4 {
                let expect = if (i, j) == (1, 2) || (i, j) == (2, 1) { 1.0 } else { 0.0 };
                assert!((h[(i, j)] - Complex64::from(expect)).norm() < 1e-15, "({i},{j})");
            }
        }
    }

    #[test]
    fn negative_gamma_rejected() {
        assert!(build_pt_model(1.0, -0.1, spin(1)).is_err());
        assert!(build_lmg_model(1.0, 1.0, -0.1, spin(1)).is_err());
        assert!(ModelParams::unit_field(0.0, 0.0, -1.0, spin(1)).is_err());
        assert!(ModelParams::unit_field(f64::NAN, 0.0, 1.0, spin(1)).is_err());
    }

    #[test]
    fn lmg_field_only_spin_half() {
        let spec = build_lmg_model(0.0, 0.8, 0.5, spin(1)).unwrap();
        let h = &spec.hamiltonian;
        assert!((h[(0, 0)].re + 0.4).abs() < 1e-15);
        assert!((h[(1, 1)].re - 0.4).abs() < 1e-15);
        assert_eq!(h[(0, 1)].norm(), 0.0);
        assert!((spec.jumps[0].rate - 1.0).abs() < 1e-15);
    }

    #[test]
    fn lmg_nonlinear_spin_one() {
        // Sx for S=1 is [[0,1,0],[1,0,1],[0,1,0]]/sqrt2, so Sx^2 = [[1/2,0,1/2],[0,1,0],[1/2,0,1/2]]
        let spec = build_lmg_model(1.0, 0.0, 0.0, spin(2)).unwrap();
        let expect = [[-0.5, 0.0, -0.5], [0.0, -1.0, 0.0], [-0.5, 0.0, -0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((spec.hamiltonian[(i, j)] - Complex64::from(expect[i][j])).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn dimer_reduces_to_pt_plus_field_at_zero_nonlinearity() {
        let s = spin(2);
        let p = ModelParams::unit_field(0.0, 0.7, 0.5, s).unwrap();
        let dimer = build_dimer_model(&p).unwrap();
        let pt = build_pt_model(0.7, 0.5, s).unwrap();
        let ops = spin_matrices(s);
        let id = identity(s.dim());
        let field = (kron(&ops.z, &id) + kron(&id, &ops.z)) * Complex64::from(-1.0);
        assert!(max_abs(&(dimer.hamiltonian - pt.hamiltonian - field)) < 1e-14);
        for (a, b) in dimer.jumps.iter().zip(&pt.jumps) {
            assert_eq!(a.rate, b.rate);
            assert_eq!(a.operator, b.operator);
        }
    }

    #[test]
    fn dimer_without_field_or_nonlinearity_equals_pt() {
        let s = spin(3);
        let p = ModelParams::new(0.0, 0.0, 0.4, 0.5, s).unwrap();
        let dimer = build_dimer_model(&p).unwrap();
        let pt = build_pt_model(0.4, 0.5, s).unwrap();
        assert_eq!(dimer.hamiltonian, pt.hamiltonian);
    }

    #[test]
    fn dimer_uncoupled_is_sum_of_lmg_sites() {
        let s = spin(2);
        let p = ModelParams::unit_field(1.3, 0.0, 0.5, s).unwrap();
        let dimer = build_dimer_model(&p).unwrap();
        let single = build_lmg_model(1.3, 1.0, 0.5, s).unwrap().hamiltonian;
        let id = identity(3);
        let expect = kron(&single, &id) + kron(&id, &single);
        assert!(max_abs(&(dimer.hamiltonian - expect)) < 1e-14);
    }

    #[test]
    fn dimer_dimension_spin_three() {
        let p = ModelParams::unit_field(1.0, 0.3, 0.5, spin(6)).unwrap();
        let spec = build_dimer_model(&p).unwrap();
        assert_eq!(spec.hamiltonian.shape(), (49, 49));
        assert_eq!(spec.dim(), 49);
    }

    #[test]
    fn spectrum_over_s_stays_bounded() {
        // ||H|| / S should not grow with S for fixed couplings
        let mut norms = Vec::new();
        for ts in [2u32, 4, 6, 8] {
            let p = ModelParams::unit_field(1.5, 0.8, 0.5, spin(ts)).unwrap();
            let h = build_dimer_model(&p).unwrap().hamiltonian;
            let ev = nalgebra::SymmetricEigen::new(h).eigenvalues;
            let radius = ev.iter().fold(0.0f64, |a, e| a.max(e.abs()));
            norms.push(radius / (ts as f64 / 2.0));
        }
        let max = norms.iter().cloned().fold(0.0, f64::max);
        assert!(max < 2.0 * (1.0 + 1.5 + 0.8), "{norms:?}");
        assert!(norms.windows(2).all(|w| w[1] <= w[0] * 1.5));
    }

    #[test]
    fn mismatched_jump_dimension_rejected() {
        let h = identity(4);
        let jumps = vec![Jump { operator: identity(3), rate: 1.0 }];
        assert!(matches!(LindbladSpec::new(h, jumps), Err(Error::DimensionMismatch { .. })));
    }

    proptest! {
        #[test]
        fn builders_are_hermitian(j in -3.0f64..3.0, lambda in -2.0f64..2.0, g in 0.0f64..2.0, ts in 1u32..5) {
            let s = spin(ts);
            let p = ModelParams::new(g, j, lambda, 0.5, s).unwrap();
            prop_assert!(hermiticity_error(&build_dimer_model(&p).unwrap().hamiltonian) < 1e-12);
            prop_assert!(hermiticity_error(&build_pt_model(lambda, 0.5, s).unwrap().hamiltonian) < 1e-12);
            prop_assert!(hermiticity_error(&build_lmg_model(j, g, 0.5, s).unwrap().hamiltonian) < 1e-12);
        }
    }
}
