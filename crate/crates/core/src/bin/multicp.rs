//! `multicp`: Monte Carlo experiments for multi-stream change-point detection.
//!
//! Exit codes: 0 success, 1 failed validation or I/O error, 2 configuration
//! error, 3 censoring gate failure.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use multicp::harness::config::ConfigFile;
use multicp::harness::output::{write_bound_curves, write_json_summary, write_sweep_csv, BoundColumns};
use multicp::harness::validate::run_suite;
use multicp::harness::{run_experiment, sweep_weighted_risk, ExperimentConfig, SweepResult};
use multicp::Error;

#[derive(Debug, Parser)]
#[command(name = "multicp", version, about = "Bayesian multiple change-point detection under an observation budget")]
struct Cli {
    /// Print the default configuration as TOML and exit.
    #[arg(long, global = true)]
    print_config: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one (procedure, q, K) experiment.
    Run(ExperimentArgs),
    /// Sweep procedures over the q, K and c grids.
    Sweep(ExperimentArgs),
    /// Emit asymptotic delay bound curves over K.
    Bounds(BoundsArgs),
    /// Run the invariant suite.
    Validate {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Replications for the statistical checks.
        #[arg(long, default_value_t = 10_000)]
        runs: usize,
    },
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// TOML configuration file; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    /// CSV destination; a JSON summary is written next to it. Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Append asymptotic bound columns.
    #[arg(long)]
    bounds: bool,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 0.01)]
    rho: f64,
    /// KL divergence D(f1 || f0).
    #[arg(long, default_value_t = 0.5)]
    kl: f64,
    #[arg(long)]
    g_star: Option<f64>,
    /// Comma-separated K values.
    #[arg(long, value_delimiter = ',', default_value = "1,2,5,10,100,200,500,1000,10000,1000000")]
    k: Vec<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.print_config {
        print!("{}", ConfigFile::defaults_toml());
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        eprintln!("no subcommand given; see --help");
        return ExitCode::from(2);
    };
    match dispatch(command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::InvalidParameter(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn dispatch(command: Command) -> multicp::Result<ExitCode> {
    match command {
        Command::Run(args) => {
            let file = load(&args)?;
            let experiments = vec![file.run_experiment()?];
            experiment(&file, experiments, &args)
        }
        Command::Sweep(args) => {
            let file = load(&args)?;
            let experiments = file.sweep_experiments()?;
            experiment(&file, experiments, &args)
        }
        Command::Bounds(args) => {
            if !(args.alpha > 0.0 && args.alpha < 1.0 && args.rho > 0.0 && args.rho < 1.0) {
                return Err(Error::Config("alpha and rho must lie in (0, 1)".into()));
            }
            if args.g_star.is_some_and(|g| g < 1.0) || args.k.contains(&0) {
                return Err(Error::Config("need g_star >= 1 and K >= 1".into()));
            }
            let out = open_out(args.out.as_deref())?;
            write_bound_curves(out, args.alpha, args.rho, args.kl, args.g_star, &args.k)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { seed, runs } => {
            let outcomes = run_suite(seed, runs)?;
            let mut all = true;
            for o in &outcomes {
                println!("{}", o.line());
                all &= o.passed;
            }
            Ok(if all { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

fn load(args: &ExperimentArgs) -> multicp::Result<ConfigFile> {
    let mut file = match &args.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    if let Some(seed) = args.seed {
        file.seed = seed;
    }
    if let Some(runs) = args.runs {
        file.runs = runs;
    }
    Ok(file)
}

fn experiment(file: &ConfigFile, experiments: Vec<ExperimentConfig>, args: &ExperimentArgs) -> multicp::Result<ExitCode> {
    let mut sweep = SweepResult {
        rows: Vec::new(),
        provenance: Vec::new(),
    };
    for cfg in &experiments {
        eprintln!(
            "K={} cells={} runs={} horizon={}",
            cfg.k,
            cfg.cells().len(),
            cfg.runs,
            cfg.horizon()
        );
        sweep.extend(run_experiment(cfg)?);
    }
    let best = sweep_weighted_risk(&sweep, &file.c_grid)?;
    let bounds = args.bounds.then(|| BoundColumns {
        kl: experiments[0].scenario.nominal_kl(),
        g_star: file.g_star,
    });

    write_sweep_csv(open_out(args.out.as_deref())?, &sweep, bounds)?;
    if let Some(path) = &args.out {
        let json = File::create(path.with_extension("json"))?;
        write_json_summary(BufWriter::new(json), &sweep, &best)?;
    }

    let failures = sweep.gate_failures();
    if failures.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        let mut seen = Vec::new();
        for row in failures {
            let cell = (row.label(), row.k, row.q.to_bits());
            if seen.contains(&cell) {
                continue;
            }
            seen.push(cell);
            eprintln!(
                "censoring gate failed: {} K={} q={} censored fraction {}",
                row.label(),
                row.k,
                row.q,
                row.summary.censored_fraction
            );
        }
        Ok(ExitCode::from(3))
    }
}

fn open_out(path: Option<&Path>) -> multicp::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}
