//! `brw`: runs experiments on branching random walks below a cube-root barrier.
//!
//! Settings resolve as built-in defaults, then the `--config` file, then
//! command-line flags. The seed additionally falls back to `BRW_SEED` when
//! neither the file nor `--seed` sets it. Exit status: 0 on success, 1 for
//! configuration or I/O errors, 2 for domain errors, 3 for numerical failures.

mod commands;
mod config;
mod error;
mod expr;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use brw_core::rng::StreamKey;
use brw_core::Execution;
use clap::{Args, Parser, Subcommand};

use crate::commands::Run;
use crate::config::{ExperimentConfig, LawSpec, MethodSpec, ScaleSpec};
use crate::error::{CliError, CliResult};
use crate::output::Artifacts;

const SEED_ENV: &str = "BRW_SEED";

fn num(s: &str) -> Result<f64, String> {
    expr::eval(s)
}

#[derive(Parser, Debug)]
#[command(name = "brw", version, about = "Branching random walks below a cube-root barrier")]
struct Cli {
    /// Experiment config (TOML), or a `manifest.json` from an earlier run.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Base seed; overrides the config file and BRW_SEED.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads: 0 = one per core, 1 = sequential.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Allow `simulate` on a law that is not critical.
    #[arg(long, global = true)]
    allow_noncritical: bool,
    /// Reproduction law table (TOML with `kind = ...`).
    #[arg(long, global = true, value_name = "FILE", conflicts_with = "gaussian")]
    law_config: Option<PathBuf>,
    /// Use the critical Gaussian law with this σ².
    #[arg(long, global = true, value_name = "SIGMA_SQ", value_parser = num)]
    gaussian: Option<f64>,
    /// Barrier spec: pow:<a>, osc:<a+>:<a->, dip:<a+>:<a->:<base> or lin:<eps>.
    #[arg(long, global = true)]
    barrier: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
#[command(rename_all = "kebab-case")]
enum Command {
    /// Critical constant, roots b of b³ - a b² + K and certificate scans (CSV).
    Constants(ConstantsArgs),
    /// Reduction of the law to the critical case (JSON).
    Reduce,
    /// Solve and classify one profile (CSV grid and JSON classification).
    Ode(OdeArgs),
    /// Extinction rate c over a grid of a (CSV).
    Rate(RateArgs),
    /// Tube probabilities of the spine walk (CSV and JSON).
    Tube(TubeArgs),
    /// Survival probabilities below a barrier (CSV, fit CSV, classification JSON).
    Simulate(SimArgs),
    /// Two-barrier population census (CSV).
    Census(CensusArgs),
    /// Extinction/survival verdict for a general barrier (JSON).
    Classify(ClassifyArgs),
    /// Many-to-one identity by exhaustive enumeration (CSV).
    CheckM2o(M2oArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Constants(_) => "constants",
            Command::Reduce => "reduce",
            Command::Ode(_) => "ode",
            Command::Rate(_) => "rate",
            Command::Tube(_) => "tube",
            Command::Simulate(_) => "simulate",
            Command::Census(_) => "census",
            Command::Classify(_) => "classify",
            Command::CheckM2o(_) => "check-m2o",
        }
    }
}

#[derive(Args, Debug)]
struct ConstantsArgs {
    #[arg(long, value_parser = num, value_delimiter = ',', allow_hyphen_values = true)]
    sigma_sq: Option<Vec<f64>>,
    #[arg(long, value_parser = num, value_delimiter = ',', allow_hyphen_values = true)]
    a: Option<Vec<f64>>,
    #[arg(long)]
    e_max: Option<u64>,
}

#[derive(Args, Debug)]
struct OdeArgs {
    #[arg(long, value_parser = num, allow_hyphen_values = true)]
    sigma_sq: Option<f64>,
    #[arg(long, value_parser = num, allow_hyphen_values = true)]
    a: Option<f64>,
    #[arg(long, value_parser = num, allow_hyphen_values = true)]
    s: Option<f64>,
    #[arg(long, value_parser = num)]
    tol: Option<f64>,
    #[arg(long, value_parser = num)]
    horizon: Option<f64>,
}

#[derive(Args, Debug)]
struct RateArgs {
    #[arg(long, value_parser = num, allow_hyphen_values = true)]
    sigma_sq: Option<f64>,
    #[arg(long, value_parser = num, value_delimiter = ',', allow_hyphen_values = true)]
    a: Option<Vec<f64>>,
    #[arg(long, value_parser = num)]
    tol: Option<f64>,
}

#[derive(Args, Debug)]
struct TubeArgs {
    #[arg(long, value_delimiter = ',')]
    j: Option<Vec<u64>>,
    /// Lower profile: const:<v> or cbrt:<coeff>:<offset>.
    #[arg(long, allow_hyphen_values = true)]
    lower: Option<String>,
    /// Upper profile: const:<v> or cbrt:<coeff>:<offset>.
    #[arg(long, allow_hyphen_values = true)]
    upper: Option<String>,
    #[arg(long, value_enum)]
    scale: Option<ScaleSpec>,
    /// Window <lo>:<hi> on S_j / j^{1/3}.
    #[arg(long, allow_hyphen_values = true)]
    endpoint: Option<String>,
    #[arg(long)]
    runs: Option<u64>,
    /// Also evaluate the exact lattice probability.
    #[arg(long)]
    exact: bool,
}

#[derive(Args, Debug)]
struct SimArgs {
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<u64>>,
    #[arg(long)]
    runs: Option<u64>,
    #[arg(long)]
    cap: Option<usize>,
    #[arg(long, value_enum)]
    method: Option<MethodSpec>,
    #[arg(long)]
    groups: Option<u64>,
    /// Sweep pow:<a> barriers over these values instead of `--barrier`.
    #[arg(long, value_parser = num, value_delimiter = ',', allow_hyphen_values = true)]
    a_grid: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct CensusArgs {
    #[arg(long, value_parser = num, allow_hyphen_values = true)]
    a: Option<f64>,
    #[arg(long, value_parser = num, allow_hyphen_values = true)]
    b: Option<f64>,
    #[arg(long)]
    growth: Option<u64>,
    #[arg(long)]
    k_max: Option<u32>,
    #[arg(long)]
    runs: Option<u64>,
    #[arg(long, value_parser = num)]
    eps: Option<f64>,
    #[arg(long)]
    cap: Option<usize>,
}

#[derive(Args, Debug)]
struct ClassifyArgs {
    #[arg(long, value_parser = num, allow_hyphen_values = true)]
    sigma_sq: Option<f64>,
    #[arg(long)]
    n_min: Option<u64>,
}

#[derive(Args, Debug)]
struct M2oArgs {
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// one, below-zero or tube:<w>.
    #[arg(long, value_delimiter = ',')]
    functional: Option<Vec<String>>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// Defaults, then the config file, then the environment seed, then flags.
fn resolve(cli: &Cli) -> CliResult<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => config::load(path)?,
        None => ExperimentConfig::default(),
    };
    if cfg.seed.is_none() {
        cfg.seed = Some(match std::env::var(SEED_ENV) {
            Ok(s) => s.trim().parse().map_err(|e| CliError::config(format!("{SEED_ENV}={s}: {e}")))?,
            Err(_) => 0,
        });
    }
    set(&mut cfg.seed, cli.seed.map(Some));
    set(&mut cfg.output_dir, cli.out.clone());
    set(&mut cfg.workers, cli.workers);
    cfg.allow_noncritical |= cli.allow_noncritical;
    if let Some(path) = &cli.law_config {
        cfg.law = config::load_law(path)?;
    }
    set(&mut cfg.law, cli.gaussian.map(|sigma_sq| LawSpec::CriticalGaussian { sigma_sq }));
    set(&mut cfg.barrier, cli.barrier.clone());
    match &cli.command {
        Command::Constants(a) => {
            let p = &mut cfg.constants;
            set(&mut p.sigma_sq, a.sigma_sq.clone());
            set(&mut p.a, a.a.clone());
            set(&mut p.e_max, a.e_max);
        }
        Command::Reduce => {}
        Command::Ode(a) => {
            let p = &mut cfg.ode;
            set(&mut p.sigma_sq, a.sigma_sq);
            set(&mut p.a, a.a);
            set(&mut p.s, a.s);
            set(&mut p.tol, a.tol);
            set(&mut p.horizon, a.horizon);
        }
        Command::Rate(a) => {
            let p = &mut cfg.rate;
            set(&mut p.sigma_sq, a.sigma_sq);
            set(&mut p.a, a.a.clone());
            set(&mut p.tol, a.tol);
        }
        Command::Tube(a) => {
            let p = &mut cfg.tube;
            set(&mut p.j, a.j.clone());
            set(&mut p.lower, a.lower.clone());
            set(&mut p.upper, a.upper.clone());
            set(&mut p.scale, a.scale);
            set(&mut p.endpoint, a.endpoint.clone().map(Some));
            set(&mut p.runs, a.runs);
            p.exact |= a.exact;
        }
        Command::Simulate(a) => {
            let p = &mut cfg.sim;
            set(&mut p.n, a.n.clone());
            set(&mut p.runs, a.runs);
            set(&mut p.cap, a.cap);
            set(&mut p.method, a.method);
            set(&mut p.groups, a.groups);
            set(&mut p.a_grid, a.a_grid.clone());
        }
        Command::Census(a) => {
            let p = &mut cfg.census;
            set(&mut p.a, a.a);
            set(&mut p.b, a.b.map(Some));
            set(&mut p.growth, a.growth);
            set(&mut p.k_max, a.k_max);
            set(&mut p.runs, a.runs);
            set(&mut p.eps, a.eps);
            set(&mut p.cap, a.cap.map(Some));
        }
        Command::Classify(a) => {
            let p = &mut cfg.classify;
            set(&mut p.sigma_sq, a.sigma_sq.map(Some));
            set(&mut p.n_min, a.n_min);
        }
        Command::CheckM2o(a) => {
            let p = &mut cfg.m2o;
            set(&mut p.n, a.n.clone());
            set(&mut p.functionals, a.functional.clone());
        }
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> CliResult<String> {
    let cfg = resolve(cli)?;
    let name = cli.command.name();
    commands::precheck(&cfg, name)?;
    let exec = if cfg.workers == 1 { Execution::Sequential } else { Execution::Parallel };
    if exec == Execution::Parallel {
        brw_core::exec::configure_workers(cfg.workers).map_err(CliError::config)?;
    }
    let out = Artifacts::create(&cfg.output_dir, name, &cfg)?;
    let seed = cfg.seed.expect("resolved seed");
    let run = Run { cfg: &cfg, out: &out, key: StreamKey::from_seed(seed).domain(name), exec };
    match cli.command {
        Command::Constants(_) => commands::constants(&run),
        Command::Reduce => commands::reduce(&run),
        Command::Ode(_) => commands::ode(&run),
        Command::Rate(_) => commands::rate(&run),
        Command::Tube(_) => commands::tube(&run),
        Command::Simulate(_) => commands::simulate(&run),
        Command::Census(_) => commands::census(&run),
        Command::Classify(_) => commands::classify(&run),
        Command::CheckM2o(_) => commands::check_m2o(&run),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("brw: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
