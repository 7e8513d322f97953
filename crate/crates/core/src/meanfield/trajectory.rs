use std::ops::ControlFlow;

use super::equations::{rhs_slice, BlochPair};
use crate::error::{Error, Result};
use crate::models::ModelParams;
use crate::ode::{Dopri5, Tolerances};

#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<BlochPair>,
}

impl Trajectory {
    pub fn last(&self) -> Option<&BlochPair> {
        self.states.last()
    }

    /// Worst per-site deviation from the unit spheres along the run.
    pub fn max_shell_error(&self) -> f64 {
        self.states.iter().fold(0.0, |acc, s| acc.max(s.shell_error()))
    }
}

/// Integrates the mean-field flow, recording every accepted step.
pub fn integrate(state0: &BlochPair, params: &ModelParams, t_final: f64, tol: Tolerances) -> Result<Trajectory> {
    if !(t_final > 0.0) {
        return Err(Error::domain(format!("t_final must be positive, got {t_final}")));
    }
    let mut traj = Trajectory { times: vec![0.0], states: vec![*state0] };
    Dopri5::new(tol).solve(
        |_, y, dy| rhs_slice(params, y, dy),
        0.0,
        &state0.to_array(),
        t_final,
        None,
        |step| {
            traj.times.push(step.t1);
            traj.states.push(BlochPair::from_slice(step.y1));
            ControlFlow::Continue(())
        },
    )?;
    Ok(traj)
}

/// Integrates and samples at `0, dt, 2 dt, ...` up to `t_final`.
pub fn integrate_sampled(
    state0: &BlochPair,
    params: &ModelParams,
    t_final: f64,
    dt: f64,
    tol: Tolerances,
) -> Result<Trajectory> {
    if !(t_final > 0.0) || !(dt > 0.0) {
        return Err(Error::domain("t_final and dt must be positive"));
    }
    let n = (t_final / dt).round() as usize;
    let times: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
    let samples = Dopri5::new(tol).solve_sampled(|_, y, dy| rhs_slice(params, y, dy), 0.0, &state0.to_array(), &times)?;
    Ok(Trajectory { times, states: samples.iter().map(|y| BlochPair::from_slice(y)).collect() })
}
