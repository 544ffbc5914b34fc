//! `spgd run | compare | check | probe`.
//!
//! Exit codes: 0 success, 1 failed checks, 2 usage or configuration error,
//! 3 internal failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use super::check;
use super::config::RunConfig;
use super::report;
use crate::diagnostics::{pl_ratio, spectral_probe};
use crate::error::{Error, Result};
use crate::optim::Trace;
use crate::rng::Rng;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "spgd",
    version,
    about = "SVD-preconditioned gradient descent experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every (method, seed) cell and write traces plus a summary.
    Run(RunArgs),
    /// As `run`, then print a milestone table and write a median trace.
    Compare(RunArgs),
    /// Run the built-in diagnostics suite.
    Check {
        #[arg(long)]
        quiet: bool,
    },
    /// Spectral probe of the configured problem at its initial point.
    Probe(ProbeArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `run.out` (default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated seed list, overriding `run.seeds`.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args, Debug)]
struct ProbeArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    quiet: bool,
}

/// Parses `args` (including the program name) and executes the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Run(a) => cmd_run(a, false),
        Command::Compare(a) => cmd_run(a, true),
        Command::Check { quiet } => {
            check::default_problems().map(|p| check::report(&check::run_suite(&p), quiet))
        }
        Command::Probe(a) => cmd_probe(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidConfig(_) => EXIT_CONFIG,
                _ => EXIT_INTERNAL,
            }
        }
    }
}

fn load(config: &Path, seeds: Option<Vec<u64>>, epochs: Option<usize>) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(s) = seeds {
        cfg.run.seeds = s;
    }
    if let Some(e) = epochs {
        cfg.run.epochs = e;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_run(a: RunArgs, compare: bool) -> Result<i32> {
    let cfg = load(&a.config, a.seeds, a.epochs)?;
    if compare && cfg.method.len() < 2 {
        return Err(Error::config(format!(
            "compare needs at least two [method.<name>] tables, config has {}",
            cfg.method.len()
        )));
    }
    let out = a
        .out
        .or_else(|| cfg.run.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let quiet = a.quiet;
    let mut progress = |t: &Trace| {
        if !quiet {
            let last = t.rows.last();
            println!(
                "{:<14} seed {:<4} epochs {:<6} loss {:<12} eval {:<12}{}",
                t.method.as_str(),
                t.seed,
                t.rows.len(),
                last.map_or("-".into(), |r| format!("{:.4e}", r.loss)),
                last.and_then(|r| r.eval_loss)
                    .map_or("-".into(), |e| format!("{e:.4e}")),
                if t.diverged { "  DIVERGED" } else { "" }
            );
        }
    };
    let (summary, traces) = super::execute(&cfg, &out, &mut progress)?;
    if compare {
        let path = report::write_median_trace(&out, &cfg.run.id, &traces)?;
        if !quiet {
            println!(
                "\n{}\n",
                report::milestone_table(&summary, &cfg.run.thresholds)
            );
            println!("median trace: {}", path.display());
        }
    }
    if !quiet {
        println!(
            "summary: {}",
            report::summary_path(&out, &cfg.run.id).display()
        );
    }
    Ok(EXIT_OK)
}

fn cmd_probe(a: ProbeArgs) -> Result<i32> {
    let cfg = load(&a.config, a.seeds, None)?;
    let problem = cfg.problem.build()?;
    let trunc = cfg.method.values().next().and_then(|m| m.trunc_tol);
    for &seed in &cfg.run.seeds {
        let theta = problem.initial_point(&mut Rng::new(seed));
        let s = spectral_probe(problem.as_ref(), &theta, trunc)?;
        let pl = pl_ratio(problem.as_ref(), &theta)
            .map_or("undefined".to_string(), |r| format!("{r:.6e}"));
        if !a.quiet {
            println!(
                "{} seed {seed}: m = {}, n = {}, sigma_min = {:.6e}, sigma_max = {:.6e}, kappa = {:.4e}, rank = {}, pl_ratio = {pl}",
                problem.name(),
                problem.param_dim(),
                problem.residual_dim(),
                s.sigma_min,
                s.sigma_max,
                s.kappa,
                s.rank
            );
        }
    }
    Ok(EXIT_OK)
}
