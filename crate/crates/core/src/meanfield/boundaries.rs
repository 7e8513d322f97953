//! Closed-form phase boundaries and their numerical counterparts from the
//! normal-state Jacobian.

use super::equations::{mf_jacobian, spectral_abscissa, BlochPair};
use crate::models::ModelParams;
use crate::spin_ops::SpinLength;

/// `|J_c|` at which the normal state loses stability towards the LMG phases:
/// `J_c^2 = ((gamma^2 - lambda^2 + g^2)^2 + 4 lambda^2 g^2) / (4 (lambda^2 + g^2))`.
pub fn lmg_boundary(lambda: f64, g: f64, gamma: f64) -> f64 {
    let l2 = lambda * lambda;
    let g2 = g * g;
    let num = (gamma * gamma - l2 + g2).powi(2) + 4.0 * l2 * g2;
    let den = 4.0 * (l2 + g2);
    if den == 0.0 {
        return f64::INFINITY;
    }
    (num / den).sqrt()
}

/// Lowest-order (in `J`) edge of the limit-cycle region near `J = 0`:
/// `lambda_c = g (1 + 2 J^2 / g^2) / 2`.
pub fn pt_boundary(j: f64, g: f64) -> f64 {
    0.5 * g * (1.0 + 2.0 * j * j / (g * g))
}

/// Spectral abscissa of the Jacobian at the normal state.
pub fn normal_state_abscissa(params: &ModelParams) -> f64 {
    spectral_abscissa(&mf_jacobian(&BlochPair::NORMAL, params))
}

fn params_at(g: f64, j: f64, lambda: f64, gamma: f64) -> ModelParams {
    let spin = SpinLength::from_twice(1).expect("valid spin");
    ModelParams { g, j, lambda, gamma, spin }
}

fn first_crossing(f: impl Fn(f64) -> f64, max: f64, scan: usize, tol: f64) -> Option<f64> {
    let mut lo = 0.0;
    if f(lo) >= 0.0 {
        return Some(0.0);
    }
    for k in 1..=scan {
        let hi = max * k as f64 / scan as f64;
        if f(hi) >= 0.0 {
            let (mut a, mut b) = (lo, hi);
            while (b - a).abs() > tol {
                let m = 0.5 * (a + b);
                if f(m) >= 0.0 {
                    b = m;
                } else {
                    a = m;
                }
            }
            return Some(0.5 * (a + b));
        }
        lo = hi;
    }
    None
}

/// Numerically locates the first `J` (scanning from 0 towards `j_limit`,
/// whose sign picks the direction) where the normal state's spectral
/// abscissa crosses zero, bisected to `tol`.
pub fn detect_lmg_boundary(lambda: f64, g: f64, gamma: f64, j_limit: f64, tol: f64) -> Option<f64> {
    let sign = j_limit.signum();
    first_crossing(
        |x| normal_state_abscissa(&params_at(g, sign * x, lambda, gamma)),
        j_limit.abs(),
        2000,
        tol,
    )
    .map(|x| sign * x)
}

/// Numerically locates the first `lambda` in `[0, lambda_max]` where the
/// normal state becomes unstable at fixed `J`.
pub fn detect_pt_boundary(j: f64, g: f64, gamma: f64, lambda_max: f64, tol: f64) -> Option<f64> {
    first_crossing(|x| normal_state_abscissa(&params_at(g, j, x, gamma)), lambda_max, 2000, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lmg_boundary_values() {
        assert!((lmg_boundary(0.0, 1.0, 0.5) - 0.625).abs() < 1e-15);
        assert!((lmg_boundary(0.0, 1.0, 0.0) - 0.5).abs() < 1e-15);
        assert_eq!(lmg_boundary(0.0, 0.0, 0.0), f64::INFINITY);
    }

    #[test]
    fn pt_boundary_values() {
        assert!((pt_boundary(0.0, 1.0) - 0.5).abs() < 1e-15);
        assert!((pt_boundary(0.5, 1.0) - 0.75).abs() < 1e-15);
        assert!((pt_boundary(0.2, 1.0) - 0.54).abs() < 1e-15);
        assert_eq!(pt_boundary(0.3, 1.0), pt_boundary(-0.3, 1.0));
    }

    #[test]
    fn closed_form_matches_jacobian_scan() {
        for k in 0..20 {
            let lambda = 0.4 * k as f64 / 19.0;
            let expect = lmg_boundary(lambda, 1.0, 0.5);
            for limit in [3.0, -3.0] {
                let found = detect_lmg_boundary(lambda, 1.0, 0.5, limit, 1e-10).unwrap();
                assert!((found.abs() - expect).abs() < 1e-6, "lambda {lambda}: {found} vs {expect}");
                assert_eq!(found.signum(), limit.signum());
            }
        }
    }

    #[test]
    fn pt_edge_at_zero_nonlinearity() {
        // linearization gives eigenvalues -gamma -+ i g +- lambda at J = 0
        let found = detect_pt_boundary(0.0, 1.0, 0.5, 1.5, 1e-10).unwrap();
        assert!((found - 0.5).abs() < 1e-8);
    }
}
