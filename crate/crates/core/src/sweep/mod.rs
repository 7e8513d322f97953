//! Parameter sweeps and point exports written as CSV.
//!
//! Each command turns a [`RunConfig`] into the complete text of one CSV
//! file: a `#` metadata line carrying the crate version and the resolved
//! configuration, a header row, then one row per record in a fixed order.
//! Points run on a rayon pool and are collected in grid order, so the text
//! does not depend on the number of workers.

mod config;

use std::path::Path;

use rayon::prelude::*;

pub use config::{
    Axis, BoundariesSection, ExactSection, GridSection, MeanFieldSection, ModelSection, OutputSection, RunConfig,
    TrajectorySection, WignerSection,
};

use crate::error::{Error, Result};
use crate::liouville::{build_liouvillian, dense_solve_bytes, observables, partial_trace, steady_state, Observables};
use crate::meanfield::{classify_point, integrate_sampled, lmg_boundary, pt_boundary, BlochPair};
use crate::models::build_dimer_model;
use crate::ode::Tolerances;
use crate::wigner::wigner_function;
use crate::VERSION;

/// Shell error below which a trajectory start is silently renormalized.
pub const SHELL_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    MfSweep,
    EdSweep,
    Boundaries,
    Wigner,
    MfTrajectory,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::MfSweep => "mf-sweep",
            Command::EdSweep => "ed-sweep",
            Command::Boundaries => "boundaries",
            Command::Wigner => "wigner",
            Command::MfTrajectory => "mf-trajectory",
        }
    }
}

/// Execution resources. Never part of the recorded configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunOptions {
    pub threads: usize,
    /// Upper bound on concurrently allocated dense solver memory, in bytes.
    pub memory_cap: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { threads: 1, memory_cap: 4 << 30 }
    }
}

/// Workers for an exact sweep: no more than `threads`, and no more than
/// the memory cap admits given one dense factorization per worker.
pub fn exact_worker_width(opts: &RunOptions, hilbert_dim: usize) -> usize {
    let per_point = dense_solve_bytes(hilbert_dim).max(1);
    opts.threads.max(1).min(opts.memory_cap / per_point).max(1)
}

fn pool(width: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(width.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

struct CsvOut {
    writer: csv::Writer<Vec<u8>>,
}

impl CsvOut {
    fn new(cmd: Command, cfg: &RunConfig, header: &[&str]) -> Result<Self> {
        let mut buf = Vec::new();
        buf.extend_from_slice(format!("# lmg {VERSION} command={} config={}\n", cmd.name(), cfg.metadata_json()).as_bytes());
        let mut writer = csv::Writer::from_writer(buf);
        writer.write_record(header).map_err(csv_err)?;
        Ok(CsvOut { writer })
    }

    fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).map_err(csv_err)
    }

    fn finish(self) -> Result<String> {
        let bytes = self.writer.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Mean-field phase diagram: `J,lambda,class,n_stable,ZA,ZB,XA,XB,YA,YB,lyapunov`.
///
/// Magnetizations are time averages over the post-transient window.
pub fn cmd_mf_sweep(cfg: &RunConfig, opts: &RunOptions) -> Result<String> {
    cfg.validate()?;
    let classify = cfg.meanfield.options()?;
    let points = cfg.grid.points();
    let model = cfg.model;
    let reports = pool(opts.threads)?.install(|| {
        points
            .par_iter()
            .map(|&(j, l)| classify_point(&model.params_at(j, l)?, &classify))
            .collect::<Result<Vec<_>>>()
    })?;

    let mut out = CsvOut::new(
        Command::MfSweep,
        cfg,
        &["J", "lambda", "class", "n_stable", "ZA", "ZB", "XA", "XB", "YA", "YB", "lyapunov"],
    )?;
    for (&(j, l), r) in points.iter().zip(&reports) {
        let a = r.time_avg;
        out.row([
            fmt(j),
            fmt(l),
            r.classification.label().to_string(),
            r.classification.n_stable().to_string(),
            fmt(a.za),
            fmt(a.zb),
            fmt(a.xa),
            fmt(a.xb),
            fmt(a.ya),
            fmt(a.yb),
            fmt(r.lyapunov),
        ])?;
    }
    out.finish()
}

/// Exact steady-state sweep: `J,lambda,S,ZA,ZB,purity,residual`.
///
/// Points whose steady state is not unique get `NaN` observables and the
/// literal `degenerate` in the residual column.
pub fn cmd_ed_sweep(cfg: &RunConfig, opts: &RunOptions) -> Result<String> {
    cfg.validate()?;
    let s = cfg.check_exact_spin()?;
    let points = cfg.grid.points();
    let model = cfg.model;
    let width = exact_worker_width(opts, s.dim() * s.dim());
    let rows = pool(width)?.install(|| {
        points
            .par_iter()
            .map(|&(j, l)| -> Result<Option<(Observables, f64)>> {
                let spec = build_dimer_model(&model.params_at(j, l)?)?;
                match steady_state(&build_liouvillian(&spec)?) {
                    Ok(ss) => Ok(Some((observables(&ss.rho, s)?, ss.residual))),
                    Err(Error::DegenerateSteadyState { .. }) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut out = CsvOut::new(Command::EdSweep, cfg, &["J", "lambda", "S", "ZA", "ZB", "purity", "residual"])?;
    for (&(j, l), r) in points.iter().zip(&rows) {
        let (za, zb, purity, residual) = match r {
            Some((o, res)) => (fmt(o.za), fmt(o.zb), fmt(o.purity), fmt(*res)),
            None => ("NaN".into(), "NaN".into(), "NaN".into(), "degenerate".into()),
        };
        out.row([fmt(j), fmt(l), fmt(s.value()), za, zb, purity, residual])?;
    }
    out.finish()
}

/// Analytic boundaries: `axis,value,boundary`. Rows with `axis=lambda` give
/// the critical `|J|` of the LMG transition at that `lambda`; rows with
/// `axis=J` give the critical `lambda` of the gain/loss transition at that `J`.
pub fn cmd_boundaries(cfg: &RunConfig) -> Result<String> {
    cfg.validate()?;
    let (g, gamma) = (cfg.model.g, cfg.model.gamma);
    let mut out = CsvOut::new(Command::Boundaries, cfg, &["axis", "value", "boundary"])?;
    for l in cfg.boundaries.lambda.points() {
        out.row(["lambda".to_string(), fmt(l), fmt(lmg_boundary(l, g, gamma))])?;
    }
    for j in cfg.boundaries.j.points() {
        out.row(["J".to_string(), fmt(j), fmt(pt_boundary(j, g))])?;
    }
    out.finish()
}

/// Wigner function of one site of the exact steady state: `theta,phi,W`.
pub fn cmd_wigner(cfg: &RunConfig) -> Result<String> {
    cfg.validate()?;
    let s = cfg.check_exact_spin()?;
    let grid = cfg.wigner.grid();
    if grid.n_theta == 0 || grid.n_phi == 0 {
        return Err(Error::Config("wigner grid needs n_theta, n_phi >= 1".into()));
    }
    let spec = build_dimer_model(&cfg.model.params()?)?;
    let ss = steady_state(&build_liouvillian(&spec)?)?;
    let reduced = partial_trace(&ss.rho, cfg.wigner.site, s)?;
    let w = wigner_function(&reduced, s, &grid)?;

    let mut out = CsvOut::new(Command::Wigner, cfg, &["theta", "phi", "W"])?;
    for (i, &theta) in w.thetas.iter().enumerate() {
        for (k, &phi) in w.phis.iter().enumerate() {
            out.row([fmt(theta), fmt(phi), fmt(w.values[(i, k)])])?;
        }
    }
    out.finish()
}

/// Mean-field trajectory sampled every `dt`: `t,XA,YA,ZA,XB,YB,ZB`.
pub fn cmd_mf_trajectory(cfg: &RunConfig) -> Result<String> {
    cfg.validate()?;
    let t = &cfg.trajectory;
    if !(t.t_final > 0.0 && t.dt > 0.0 && t.t_final.is_finite()) {
        return Err(Error::Config("trajectory.t_final and trajectory.dt must be positive".into()));
    }
    let state0 = BlochPair::from_array(t.state0);
    if !state0.is_finite() || state0.shell_error() > SHELL_TOL {
        return Err(Error::Config(format!(
            "trajectory.state0 is off the unit spheres (error {:.3e})",
            state0.shell_error()
        )));
    }
    let traj = integrate_sampled(
        &state0.normalized(),
        &cfg.model.params()?,
        t.t_final,
        t.dt,
        Tolerances { rtol: t.rtol, atol: t.atol },
    )?;

    let mut out = CsvOut::new(Command::MfTrajectory, cfg, &["t", "XA", "YA", "ZA", "XB", "YB", "ZB"])?;
    for (time, s) in traj.times.iter().zip(&traj.states) {
        let mut row = vec![fmt(*time)];
        row.extend(s.to_array().iter().map(|v| fmt(*v)));
        out.row(row)?;
    }
    out.finish()
}

pub fn run(cmd: Command, cfg: &RunConfig, opts: &RunOptions) -> Result<String> {
    match cmd {
        Command::MfSweep => cmd_mf_sweep(cfg, opts),
        Command::EdSweep => cmd_ed_sweep(cfg, opts),
        Command::Boundaries => cmd_boundaries(cfg),
        Command::Wigner => cmd_wigner(cfg),
        Command::MfTrajectory => cmd_mf_trajectory(cfg),
    }
}

/// Writes the whole file at once, or to stdout when `path` is `None`.
pub fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}
