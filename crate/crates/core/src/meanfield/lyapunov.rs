use std::ops::ControlFlow;

use super::equations::{mf_jacobian, rhs_slice, BlochPair};
use crate::error::{Error, Result};
use crate::models::ModelParams;
use crate::ode::{Dopri5, Tolerances};

#[derive(Clone, Copy, Debug)]
pub struct LyapunovOptions {
    /// Time between tangent-vector renormalizations.
    pub renorm_interval: f64,
    /// Initial stretch excluded from the average; the tangent vector still
    /// evolves through it. Removes the bias of transient stretching, which
    /// decays only like `1/t` on neutral orbits.
    pub t_discard: f64,
    pub tol: Tolerances,
    pub max_steps: usize,
}

impl Default for LyapunovOptions {
    fn default() -> Self {
        LyapunovOptions { renorm_interval: 1.0, t_discard: 0.0, tol: Tolerances::default(), max_steps: 20_000_000 }
    }
}

fn variational_rhs(params: &ModelParams, y: &[f64], dy: &mut [f64]) {
    rhs_slice(params, &y[..6], &mut dy[..6]);
    let jac = mf_jacobian(&BlochPair::from_slice(&y[..6]), params);
    for r in 0..6 {
        dy[6 + r] = (0..6).map(|c| jac[(r, c)] * y[6 + c]).sum();
    }
}

/// Removes the radial components so the tangent vector stays on the
/// product of spheres; the radial directions carry the off-shell rates
/// `2 gamma Z_A` and `-2 gamma Z_B`, which are not part of the physical flow.
fn project_tangent(y: &mut [f64]) {
    for site in 0..2 {
        let r = &y[3 * site..3 * site + 3];
        let rr: f64 = r.iter().map(|v| v * v).sum();
        if rr == 0.0 {
            continue;
        }
        let dot: f64 = (0..3).map(|k| y[3 * site + k] * y[6 + 3 * site + k]).sum();
        for k in 0..3 {
            y[6 + 3 * site + k] -= dot / rr * y[3 * site + k];
        }
    }
}

/// Largest Lyapunov exponent of the on-shell flow: the tangent vector is
/// propagated with the analytic Jacobian and renormalized every
/// `renorm_interval`, and the average log growth rate over `t_total`
/// (after `t_discard`) is returned.
pub fn lyapunov_estimate(params: &ModelParams, state0: &BlochPair, t_total: f64, opts: &LyapunovOptions) -> Result<f64> {
    if !(t_total > 0.0) || !(opts.renorm_interval > 0.0) || !(opts.t_discard >= 0.0) {
        return Err(Error::domain("t_total and renorm_interval must be positive, t_discard non-negative"));
    }
    let ode = Dopri5::new(opts.tol).with_max_steps(opts.max_steps);
    let mut y = [0.0; 12];
    y[..6].copy_from_slice(&state0.to_array());
    // fixed generic direction
    for (k, v) in y[6..].iter_mut().enumerate() {
        *v = 1.0 + 0.37 * k as f64;
    }
    project_tangent(&mut y);
    let norm = y[6..].iter().map(|v| v * v).sum::<f64>().sqrt();
    y[6..].iter_mut().for_each(|v| *v /= norm);

    let skipped = (opts.t_discard / opts.renorm_interval).round() as usize;
    let chunks = (t_total / opts.renorm_interval).round().max(1.0) as usize;
    let dt = t_total / chunks as f64;
    let mut log_growth = 0.0;
    let mut h = None;
    let mut steps = 0usize;
    for c in 0..skipped + chunks {
        let t0 = c as f64 * dt;
        let sol = ode.solve(|_, y, dy| variational_rhs(params, y, dy), t0, &y, t0 + dt, h, |_| {
            steps += 1;
            ControlFlow::Continue(())
        })?;
        if steps > opts.max_steps {
            return Err(Error::Integration { t: t0, reason: "Lyapunov step budget exhausted".into() });
        }
        h = Some(sol.h_next);
        y.copy_from_slice(&sol.y);
        project_tangent(&mut y);
        let norm = y[6..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Integration { t: t0 + dt, reason: "tangent vector collapsed".into() });
        }
        if c >= skipped {
            log_growth += norm.ln();
        }
        y[6..].iter_mut().for_each(|v| *v /= norm);
    }
    Ok(log_growth / (chunks as f64 * dt))
}
