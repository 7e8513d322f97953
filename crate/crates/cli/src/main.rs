//! `lmg`: phase-diagram sweeps, exact steady states, Wigner exports and
//! trajectories for the driven-dissipative LMG dimer.
//!
//! Exit codes: 0 completed (rows may be flagged), 2 configuration error,
//! 3 numerical or I/O failure that aborted the run.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lmg_core::sweep::{self, Command, RunConfig, RunOptions};
use lmg_core::Error;

#[derive(Parser)]
#[command(name = "lmg", version, about = "Driven-dissipative LMG dimer: mean-field and exact sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Mean-field phase diagram over the [grid] section.
    MfSweep(Common),
    /// Exact steady states over the [grid] section.
    EdSweep(Common),
    /// Analytic phase boundaries over the [boundaries] section.
    Boundaries(Common),
    /// Single-site Wigner function of the exact steady state at [model].
    Wigner(Common),
    /// Mean-field trajectory from [trajectory].state0 at [model].
    MfTrajectory(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override model.gamma (units of g).
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    /// Override model.spin (positive half-integer).
    #[arg(long, allow_negative_numbers = true)]
    spin: Option<f64>,
    /// Output file; stdout when neither this nor output.path is set.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, env = "LMG_THREADS", default_value_t = 1)]
    threads: usize,
    /// Memory cap for concurrent dense exact solves, in MiB.
    #[arg(long, default_value_t = 4096)]
    memory_cap: usize,
}

impl Cmd {
    fn split(self) -> (Command, Common) {
        match self {
            Cmd::MfSweep(c) => (Command::MfSweep, c),
            Cmd::EdSweep(c) => (Command::EdSweep, c),
            Cmd::Boundaries(c) => (Command::Boundaries, c),
            Cmd::Wigner(c) => (Command::Wigner, c),
            Cmd::MfTrajectory(c) => (Command::MfTrajectory, c),
        }
    }
}

fn load_config(args: &Common) -> Result<RunConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(gamma) = args.gamma {
        cfg.model.gamma = gamma;
    }
    if let Some(spin) = args.spin {
        cfg.model.spin = spin;
    }
    if let Some(out) = &args.out {
        cfg.output.path = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = cli.command.split();

    let cfg = match load_config(&args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("lmg {}: {e}", command.name());
            return ExitCode::from(2);
        }
    };
    let opts = RunOptions { threads: args.threads.max(1), memory_cap: args.memory_cap.saturating_mul(1 << 20) };

    let result = sweep::run(command, &cfg, &opts).and_then(|text| sweep::write_output(cfg.output.path.as_deref(), &text));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lmg {}: {e}", command.name());
            match e {
                Error::Config(_) | Error::InvalidSpin(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}
