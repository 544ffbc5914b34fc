//! Experiment orchestration: configuration, run cells, reports, the
//! diagnostics suite and the command-line front end.

pub mod check;
pub mod cli;
pub mod config;
pub mod report;

use std::path::Path;

use crate::error::{Error, Result};
use crate::optim::{run, NoObserver, Trace};

pub use config::{MethodSection, ProblemSpec, RunConfig, RunSection};
pub use report::{Summary, TRACE_COLUMNS};

/// Runs every (method, seed) cell of the config, each on its own problem
/// instance. `progress` is called after each cell.
pub fn run_cells(cfg: &RunConfig, progress: &mut dyn FnMut(&Trace)) -> Result<Vec<Trace>> {
    let mut traces = Vec::new();
    for (method, section) in &cfg.method {
        let hyper = section.hyper();
        for &seed in &cfg.run.seeds {
            let mut problem = cfg.problem.build().map_err(|e| match e {
                Error::InvalidInput(msg) => Error::config(format!("problem: {msg}")),
                other => other,
            })?;
            let trace = run(
                problem.as_mut(),
                *method,
                &hyper,
                cfg.run.epochs,
                seed,
                &mut NoObserver,
            )?;
            progress(&trace);
            traces.push(trace);
        }
    }
    Ok(traces)
}

/// Runs all cells, writes one trace CSV per cell (plus evaluation CSVs) and
/// the summary JSON under `out`.
pub fn execute(
    cfg: &RunConfig,
    out: &Path,
    progress: &mut dyn FnMut(&Trace),
) -> Result<(Summary, Vec<Trace>)> {
    let traces = run_cells(cfg, progress)?;
    for t in &traces {
        report::write_trace(out, &cfg.run.id, t)?;
    }
    let summary = report::summarize(&cfg.hash(), &cfg.run.id, &cfg.run.thresholds, &traces)?;
    report::write_summary(out, &summary)?;
    Ok((summary, traces))
}
