use std::ops::ControlFlow;

use nalgebra::Vector6;

use super::equations::{mf_jacobian, mf_rhs, rhs_slice, tangent_abscissa, BlochPair};
use crate::error::Result;
use crate::models::ModelParams;
use crate::ode::{Dopri5, Tolerances};

#[derive(Clone, Copy, Debug)]
pub struct SearchOptions {
    pub t_transient: f64,
    pub tol: Tolerances,
    /// Converged when `max |rhs| < newton_tol`.
    pub newton_tol: f64,
    pub max_newton_iter: usize,
    /// Roots closer than this in max-norm are the same root.
    pub merge_tol: f64,
    /// Stable iff the tangent-space spectral abscissa is below this.
    pub stability_threshold: f64,
    /// Transients stop early once `max |rhs|` falls below this.
    pub settle_tol: f64,
    pub max_steps_per_seed: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            t_transient: 200.0,
            tol: Tolerances::default(),
            newton_tol: 1e-10,
            max_newton_iter: 50,
            merge_tol: 1e-6,
            stability_threshold: -1e-8,
            settle_tol: 1e-9,
            max_steps_per_seed: 2_000_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedPoint {
    pub state: BlochPair,
    pub abscissa: f64,
    pub stable: bool,
}

#[derive(Clone, Debug, Default)]
pub struct FixedPointSearch {
    /// Distinct converged roots, closed under the Z2 image.
    pub points: Vec<FixedPoint>,
    /// State of each seed at the end of its transient (or on settling).
    pub endpoints: Vec<BlochPair>,
    /// Seeds whose Newton refinement diverged or left the unit spheres.
    pub discarded: usize,
    /// Seeds whose transient integration failed.
    pub failed: usize,
    pub steps: usize,
}

impl FixedPointSearch {
    pub fn stable(&self) -> impl Iterator<Item = &FixedPoint> {
        self.points.iter().filter(|p| p.stable)
    }

    pub fn n_stable(&self) -> usize {
        self.stable().count()
    }
}

fn fibonacci_sphere(n: usize, phase: f64) -> Vec<(f64, f64, f64)> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|k| {
            let z = 1.0 - (2 * k + 1) as f64 / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = phase + golden * k as f64;
            (r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// Deterministic on-shell seeds: the product of two Fibonacci point sets with
/// `ceil(sqrt(n))` points each, truncated to `n`.
pub fn fibonacci_seeds(n: usize) -> Vec<BlochPair> {
    let per_site = (n as f64).sqrt().ceil().max(1.0) as usize;
    let a = fibonacci_sphere(per_site, 0.0);
    let b = fibonacci_sphere(per_site, 1.0);
    let mut seeds = Vec::with_capacity(per_site * per_site);
    for &(xa, ya, za) in &a {
        for &(xb, yb, zb) in &b {
            seeds.push(BlochPair { xa, ya, za, xb, yb, zb });
        }
    }
    seeds.truncate(n);
    seeds
}

fn max_abs(v: &BlochPair) -> f64 {
    v.to_array().iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

/// Newton iteration on `rhs = 0`; falls back to a pseudo-inverse when the
/// Jacobian is singular (e.g. `gamma = 0`, where the radial direction is neutral).
pub(crate) fn newton_refine(start: &BlochPair, params: &ModelParams, opts: &SearchOptions) -> Option<BlochPair> {
    let mut x = start.to_vector();
    for _ in 0..opts.max_newton_iter {
        let s = BlochPair::from_slice(x.as_slice());
        let f = mf_rhs(&s, params);
        if max_abs(&f) < opts.newton_tol {
            return Some(s);
        }
        let jac = mf_jacobian(&s, params);
        let rhs: Vector6<f64> = -f.to_vector();
        let delta = match jac.lu().solve(&rhs) {
            Some(d) if d.iter().all(|v| v.is_finite()) => d,
            _ => jac.svd(true, true).solve(&rhs, 1e-12).ok()?,
        };
        x += delta;
        if x.iter().any(|v| !v.is_finite() || v.abs() > 2.0) {
            return None;
        }
    }
    let s = BlochPair::from_slice(x.as_slice());
    (max_abs(&mf_rhs(&s, params)) < opts.newton_tol).then_some(s)
}

fn push_unique(points: &mut Vec<FixedPoint>, state: BlochPair, params: &ModelParams, opts: &SearchOptions) {
    if points.iter().any(|p| p.state.max_distance(&state) < opts.merge_tol) {
        return;
    }
    let abscissa = tangent_abscissa(&state, params);
    points.push(FixedPoint { state, abscissa, stable: abscissa < opts.stability_threshold });
}

/// Runs each seed through a transient, Newton-refines the endpoint and
/// collects the distinct on-shell roots with their linear stability.
pub fn find_fixed_points(params: &ModelParams, seeds: &[BlochPair], opts: &SearchOptions) -> Result<FixedPointSearch> {
    let ode = Dopri5::new(opts.tol).with_max_steps(opts.max_steps_per_seed);
    let mut search = FixedPointSearch::default();
    let mut scratch = [0.0; 6];

    // The normal state is a root for every parameter set.
    push_unique(&mut search.points, BlochPair::NORMAL, params, opts);

    for seed in seeds {
        let mut steps = 0usize;
        let run = ode.solve(
            |_, y, dy| rhs_slice(params, y, dy),
            0.0,
            &seed.to_array(),
            opts.t_transient,
            None,
            |step| {
                steps += 1;
                rhs_slice(params, step.y1, &mut scratch);
                if scratch.iter().all(|v| v.abs() < opts.settle_tol) {
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            },
        );
        search.steps += steps;
        let end = match run {
            Ok(sol) => BlochPair::from_slice(&sol.y),
            Err(_) => {
                search.failed += 1;
                continue;
            }
        };
        search.endpoints.push(end);

        if search.points.iter().any(|p| p.state.max_distance(&end) < opts.merge_tol) {
            continue;
        }
        match newton_refine(&end, params, opts) {
            Some(root) if root.shell_error() < opts.merge_tol => {
                push_unique(&mut search.points, root, params, opts);
                push_unique(&mut search.points, root.z2_image(), params, opts);
            }
            _ => search.discarded += 1,
        }
    }

    // Order roots so reports do not depend on which seed found what first.
    search.points.sort_by(|a, b| {
        a.state
            .to_array()
            .iter()
            .zip(b.state.to_array())
            .map(|(x, y)| x.total_cmp(&y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(search)
}
