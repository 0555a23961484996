//! Experiment CLI: closed-loop simulations, config-driven sweeps, and
//! certificate checks for the three benchmark systems.
//!
//! Exit codes: 0 success, 2 config error, 3 certificate violation,
//! 4 solver infeasibility, 5 numerics/escape.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use issf_core::bench::{self, ExperimentConfig};
use issf_core::Error;

#[derive(Parser)]
#[command(
    name = "issf",
    about = "Safety-critical control experiments with disturbance margins"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a controller over a (d, epsilon, x0) grid and emit traces.
    Simulate(SimulateArgs),
    /// Run the grid described by a config file.
    Sweep {
        /// Flat `key = value` config file.
        #[arg(long)]
        config: PathBuf,
        /// Output directory for traces, summary, and figures.
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample the example's certificate conditions (no simulation).
    Check {
        /// Example name: scalar, arctan, or robot2dof.
        #[arg(long)]
        example: String,
        /// Seed for certificate sampling.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of random states to sample.
        #[arg(long)]
        samples: Option<usize>,
    },
}

#[derive(Args)]
struct SimulateArgs {
    /// Example name: scalar, arctan, or robot2dof.
    #[arg(long)]
    example: String,
    /// Controller: none, issf_feedback, universal, qp, issf_qp, min_norm.
    #[arg(long)]
    controller: Option<String>,
    /// Disturbance amplitudes (comma-separated list).
    #[arg(long, value_delimiter = ',')]
    d: Option<Vec<f64>>,
    /// Margin parameters epsilon (comma-separated list).
    #[arg(long, value_delimiter = ',')]
    epsilon: Option<Vec<f64>>,
    /// Initial states: one scalar per run for 1-state examples, or the four
    /// components of a single robot state.
    #[arg(long)]
    x0: Option<String>,
    /// Final time [s].
    #[arg(long)]
    tmax: Option<f64>,
    /// Integration step [s].
    #[arg(long)]
    dt: Option<f64>,
    /// Disturbance kind: constant or sinusoid.
    #[arg(long)]
    disturbance: Option<String>,
    /// Sinusoid frequency [Hz].
    #[arg(long)]
    frequency: Option<f64>,
    /// Linear barrier decay rate (scalar example).
    #[arg(long)]
    lambda: Option<f64>,
    /// Seed recorded in headers and used by sampling.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Simulate(args) => {
            let cfg = config_from_args(&args)?;
            let artifacts = bench::run(&cfg)?;
            let files = artifacts.emit(&args.out)?;
            for run in &artifacts.runs {
                println!(
                    "{} controller={} d={} eps={} peak={} status={}",
                    cfg.example, cfg.controller, run.d_amp, run.epsilon, run.peak, run.status
                );
            }
            println!("wrote {} files to {}", files.len(), args.out.display());
            Ok(ExitCode::from(artifacts.worst_exit() as u8))
        }
        Command::Sweep { config, out } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let artifacts = bench::sweep(&cfg)?;
            let files = artifacts.emit(&out)?;
            println!(
                "swept {} cells, wrote {} files to {}",
                artifacts.runs.len(),
                files.len(),
                out.display()
            );
            // Per-cell failures are recorded in the summary; the sweep
            // itself succeeded.
            Ok(ExitCode::SUCCESS)
        }
        Command::Check {
            example,
            seed,
            samples,
        } => {
            let mut cfg = ExperimentConfig::default_for(example.parse()?);
            cfg.seed = seed;
            if let Some(s) = samples {
                cfg.samples = s;
            }
            let out = bench::check_example(&cfg)?;
            for report in &out.reports {
                println!("{report}");
            }
            if out.passed() {
                println!("all certificate checks passed");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("{} certificate violations found", out.violations);
                Ok(ExitCode::from(3))
            }
        }
    }
}

fn config_from_args(args: &SimulateArgs) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::default_for(args.example.parse()?);
    if let Some(c) = &args.controller {
        cfg.set("controller", c)?;
    }
    if let Some(d) = &args.d {
        cfg.d_values = d.clone();
    }
    if let Some(eps) = &args.epsilon {
        cfg.epsilon_values = eps.clone();
    }
    if let Some(x0) = &args.x0 {
        cfg.set("x0", x0)?;
    }
    if let Some(t) = args.tmax {
        cfg.tmax = t;
    }
    if let Some(dt) = args.dt {
        cfg.dt = dt;
    }
    if let Some(kind) = &args.disturbance {
        cfg.set("disturbance", kind)?;
    }
    if let Some(f) = args.frequency {
        cfg.frequency = f;
    }
    if let Some(l) = args.lambda {
        cfg.lambda = l;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}
