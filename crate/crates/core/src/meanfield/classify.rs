use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use super::equations::{rhs_slice, tangent_abscissa, BlochPair};
use super::fixed_points::{fibonacci_seeds, find_fixed_points, newton_refine, SearchOptions};
use super::lyapunov::{lyapunov_estimate, LyapunovOptions};
use crate::error::{Error, Result};
use crate::models::ModelParams;
use crate::ode::{Dopri5, Tolerances};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    pub n_seeds: usize,
    pub t_transient: f64,
    /// Averaging window after the transient.
    pub t_window: f64,
    /// Length of each Lyapunov run, started at the end of a seed's window.
    pub t_lyapunov: f64,
    /// Part of each Lyapunov run left out of the average.
    pub t_lyapunov_discard: f64,
    /// Number of evenly spaced seeds whose orbits get an averaging window.
    pub window_seeds: usize,
    /// Number of evenly spaced windowed seeds that get a Lyapunov run.
    pub lyapunov_seeds: usize,
    /// A transient ending this close (max-norm) to a stable fixed point
    /// counts as captured by it.
    pub capture_radius: f64,
    /// Exponents above this (in units of g) count as chaotic.
    pub lyapunov_tol: f64,
    /// Poincaré return distance that counts as closing the orbit.
    pub recurrence_tol: f64,
    pub tol: Tolerances,
    /// Total accepted+rejected step budget for one parameter point.
    pub step_budget: usize,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            n_seeds: 64,
            t_transient: 200.0,
            t_window: 400.0,
            t_lyapunov: 1000.0,
            t_lyapunov_discard: 500.0,
            window_seeds: 64,
            lyapunov_seeds: 8,
            capture_radius: 1e-3,
            lyapunov_tol: 0.01,
            recurrence_tol: 1e-3,
            tol: Tolerances::default(),
            step_budget: 20_000_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    FixedPoints(usize),
    LimitCycle,
    Chaotic,
    Unresolved,
}

impl Classification {
    pub fn label(&self) -> &'static str {
        match self {
            Classification::FixedPoints(_) => "fixed",
            Classification::LimitCycle => "limit_cycle",
            Classification::Chaotic => "chaotic",
            Classification::Unresolved => "unresolved",
        }
    }

    pub fn n_stable(&self) -> usize {
        match self {
            Classification::FixedPoints(n) => *n,
            _ => 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub seeds: usize,
    pub discarded_seeds: usize,
    pub failed_seeds: usize,
    pub unstable_roots: usize,
    /// Windowed seeds that ended on an unstable fixed point (its stable
    /// manifold) and were left out of the averages.
    pub saddle_seeds: usize,
    pub steps: usize,
    pub section_returns: usize,
    pub min_return_distance: f64,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttractorReport {
    pub classification: Classification,
    /// Stable fixed points, sorted.
    pub fixed_points: Vec<BlochPair>,
    /// Post-transient time average, averaged over all seeds.
    pub time_avg: BlochPair,
    pub lyapunov: f64,
    pub diagnostics: Diagnostics,
}

struct Window {
    average: BlochPair,
    end: BlochPair,
    returns: usize,
    min_return: f64,
    steps: usize,
    settled: bool,
}

/// Coordinates invariant under a common rotation of both spins about z:
/// `(Z_A, Z_B, r_A·r_B in-plane, (r_A × r_B)_z)`. At `J = 0` that rotation is
/// a symmetry, and orbits that are periodic up to it are quasi-periodic in
/// the lab frame, so recurrence is tested in these coordinates.
fn invariants(y: &[f64]) -> [f64; 4] {
    [y[2], y[5], y[0] * y[3] + y[1] * y[4], y[0] * y[4] - y[1] * y[3]]
}

fn invariant_rates(y: &[f64], dy: &[f64]) -> [f64; 4] {
    [
        dy[2],
        dy[5],
        dy[0] * y[3] + y[0] * dy[3] + dy[1] * y[4] + y[1] * dy[4],
        dy[0] * y[4] + y[0] * dy[4] - dy[1] * y[3] - y[1] * dy[3],
    ]
}

fn max_diff(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    (0..4).fold(0.0f64, |acc, k| acc.max((a[k] - b[k]).abs()))
}

/// `k`-th of `m` distinct picks out of `n` seeds. Seeds form a product grid
/// over the two spheres, so picks step roughly along its diagonal rather
/// than down one row.
fn spread(k: usize, m: usize, n: usize) -> usize {
    if m >= n {
        return k;
    }
    let gcd = |mut a: usize, mut b: usize| {
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a
    };
    let mut step = n / m + 1;
    while gcd(step, n) != 1 {
        step += 1;
    }
    (k * step) % n
}

/// Integrates over the averaging window from `start`, accumulating the
/// time average and the returns of the invariant coordinates to a
/// Poincaré section through their starting value.
fn averaging_window(params: &ModelParams, start: &BlochPair, opts: &ClassifyOptions, budget: usize) -> Result<Window> {
    let y0 = start.to_array();
    let q0 = invariants(&y0);
    let mut f0 = [0.0; 6];
    rhs_slice(params, &y0, &mut f0);
    let normal = invariant_rates(&y0, &f0);
    let has_section = normal.iter().any(|v| v.abs() > 1e-8);

    let mut integral = [0.0; 6];
    let mut crossings: Vec<[f64; 4]> = Vec::new();
    let mut interp = [0.0; 6];
    let mut steps = 0usize;
    let mut drift = 0.0f64;
    let side = |y: &[f64]| -> f64 {
        let q = invariants(y);
        (0..4).map(|k| (q[k] - q0[k]) * normal[k]).sum()
    };

    let sol = Dopri5::new(opts.tol).with_max_steps(budget).solve(
        |_, y, dy| rhs_slice(params, y, dy),
        0.0,
        &y0,
        opts.t_window,
        None,
        |step| {
            steps += 1;
            step.accumulate_integral(&mut integral);
            drift = drift.max(max_diff(&invariants(step.y1), &q0));
            if has_section {
                let (s0, s1) = (side(step.y0), side(step.y1));
                if s0 < 0.0 && s1 >= 0.0 {
                    // secant on the signed distance, then Hermite interpolation
                    let frac = s0 / (s0 - s1);
                    step.interpolate(step.t0 + frac * step.h(), &mut interp);
                    crossings.push(invariants(&interp));
                }
            }
            ControlFlow::Continue(())
        },
    )?;

    // Recurrence: the last crossing revisits an earlier one (any period).
    // Invariants that never move describe a uniformly rotating orbit.
    let mut min_return = if drift < opts.recurrence_tol { drift } else { f64::INFINITY };
    if let Some((last, earlier)) = crossings.split_last() {
        for c in earlier {
            min_return = min_return.min(max_diff(c, last));
        }
    }

    let avg: Vec<f64> = integral.iter().map(|v| v / opts.t_window).collect();
    Ok(Window {
        average: BlochPair::from_slice(&avg),
        end: BlochPair::from_slice(&sol.y),
        returns: crossings.len(),
        min_return,
        steps,
        settled: false,
    })
}

/// Classifies the long-time mean-field dynamics at one parameter point.
///
/// Stable fixed points found from the deterministic seed set win. Otherwise
/// the dynamics is chaotic when the largest exponent over the sampled seeds
/// exceeds `lyapunov_tol`, and a limit cycle when it does not. Whether the
/// first seed's orbit returns to its Poincaré section is recorded in the
/// diagnostics; a regular orbit that never closes is flagged as likely
/// quasi-periodic. `Unresolved` means the step budget ran out.
pub fn classify_point(params: &ModelParams, opts: &ClassifyOptions) -> Result<AttractorReport> {
    if opts.n_seeds == 0 {
        return Err(Error::domain("n_seeds must be at least 1"));
    }
    let seeds = fibonacci_seeds(opts.n_seeds);
    let search_opts = SearchOptions {
        t_transient: opts.t_transient,
        tol: opts.tol,
        max_steps_per_seed: opts.step_budget,
        ..SearchOptions::default()
    };
    let search = find_fixed_points(params, &seeds, &search_opts)?;
    let stable: Vec<BlochPair> = search.stable().map(|p| p.state).collect();
    let mut diagnostics = Diagnostics {
        seeds: seeds.len(),
        discarded_seeds: search.discarded,
        failed_seeds: search.failed,
        unstable_roots: search.points.len() - stable.len(),
        steps: search.steps,
        min_return_distance: f64::INFINITY,
        ..Diagnostics::default()
    };

    let unresolved = |mut diagnostics: Diagnostics, note: String| AttractorReport {
        classification: Classification::Unresolved,
        fixed_points: stable.clone(),
        time_avg: BlochPair::default(),
        lyapunov: f64::NAN,
        diagnostics: {
            diagnostics.note = Some(note);
            diagnostics
        },
    };

    if search.endpoints.is_empty() {
        return Ok(unresolved(diagnostics, "every seed failed to integrate".into()));
    }
    if search.steps >= opts.step_budget {
        return Ok(unresolved(diagnostics, "step budget exhausted during transients".into()));
    }

    // Post-transient windows for a spread of seeds. A seed captured by a
    // stable fixed point stays there.
    let n_windows = opts.window_seeds.clamp(1, search.endpoints.len());
    let mut windows = Vec::with_capacity(n_windows);
    for k in 0..n_windows {
        let end = &search.endpoints[spread(k, n_windows, search.endpoints.len())];
        if let Some(fp) = stable.iter().find(|fp| fp.max_distance(end) < opts.capture_radius) {
            windows.push(Window { average: *fp, end: *fp, returns: 0, min_return: f64::INFINITY, steps: 0, settled: true });
            continue;
        }
        let remaining = opts.step_budget.saturating_sub(diagnostics.steps);
        match averaging_window(params, end, opts, remaining) {
            Ok(w) => {
                diagnostics.steps += w.steps;
                windows.push(w);
            }
            Err(e) => return Ok(unresolved(diagnostics, format!("averaging window: {e}"))),
        }
    }

    // Orbits still sitting on a saddle after the window track a measure-zero
    // stable manifold, not an attractor.
    let on_saddle = |w: &Window| {
        !w.settled
            && newton_refine(&w.end, params, &search_opts).is_some_and(|root| {
                root.max_distance(&w.end) < opts.capture_radius
                    && tangent_abscissa(&root, params) >= search_opts.stability_threshold
            })
    };
    let attracting: Vec<Window> = {
        let (keep, saddles): (Vec<Window>, Vec<Window>) = windows.into_iter().partition(|w| !on_saddle(w));
        diagnostics.saddle_seeds = saddles.len();
        if keep.is_empty() {
            saddles
        } else {
            keep
        }
    };
    let windows = attracting;
    diagnostics.section_returns = windows[0].returns;
    diagnostics.min_return_distance = windows[0].min_return;
    let mut mean = [0.0; 6];
    for w in &windows {
        for (m, v) in mean.iter_mut().zip(w.average.to_array()) {
            *m += v / windows.len() as f64;
        }
    }
    let time_avg = BlochPair::from_array(mean);

    // Attractors can coexist, so the exponent is the largest over a spread of seeds.
    // A seed at rest sits on a fixed point, whose exponent is its tangent abscissa.
    let lyap_opts = LyapunovOptions {
        t_discard: opts.t_lyapunov_discard,
        tol: opts.tol,
        max_steps: opts.step_budget,
        ..LyapunovOptions::default()
    };
    let n_lyap = opts.lyapunov_seeds.clamp(1, windows.len());
    let mut lyapunov = f64::NEG_INFINITY;
    for k in 0..n_lyap {
        let w = &windows[spread(k, n_lyap, windows.len())];
        if w.settled {
            lyapunov = lyapunov.max(tangent_abscissa(&w.end, params));
            continue;
        }
        match lyapunov_estimate(params, &w.end, opts.t_lyapunov, &lyap_opts) {
            Ok(l) => lyapunov = lyapunov.max(l),
            Err(e) => return Ok(unresolved(diagnostics, format!("Lyapunov run: {e}"))),
        }
    }

    let classification = if !stable.is_empty() {
        Classification::FixedPoints(stable.len())
    } else if lyapunov > opts.lyapunov_tol {
        Classification::Chaotic
    } else {
        // A regular orbit that never closes within the window is quasi-periodic;
        // it is reported with the limit cycles and flagged.
        if windows[0].min_return >= opts.recurrence_tol {
            diagnostics.note = Some(format!(
                "regular orbit did not close, likely quasi-periodic (min return {:.3e}, {} returns)",
                windows[0].min_return, windows[0].returns
            ));
        }
        Classification::LimitCycle
    };

    Ok(AttractorReport { classification, fixed_points: stable, time_avg, lyapunov, diagnostics })
}
