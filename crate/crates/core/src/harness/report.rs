//! Trace CSVs, the summary JSON and the comparison table.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::diagnostics::milestones;
use crate::error::{Error, Result};
use crate::optim::{Method, Trace};

/// Columns of a trace CSV, in order.
pub const TRACE_COLUMNS: [&str; 9] = [
    "run_id",
    "method",
    "seed",
    "epoch",
    "loss",
    "grad_norm",
    "residual_norm",
    "lr",
    "wall_ms",
];

#[derive(Serialize)]
struct CsvRow<'a> {
    run_id: &'a str,
    method: &'a str,
    seed: u64,
    epoch: usize,
    loss: f64,
    grad_norm: f64,
    residual_norm: f64,
    lr: f64,
    wall_ms: f64,
}

#[derive(Serialize)]
struct EvalRow<'a> {
    run_id: &'a str,
    method: &'a str,
    seed: u64,
    epoch: usize,
    eval_loss: f64,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::numerical(format!("writing {}: {e}", path.display()))
}

/// `<out>/<method>/<run_id>-<seed>.csv`
pub fn trace_path(out: &Path, run_id: &str, method: Method, seed: u64) -> PathBuf {
    out.join(method.as_str())
        .join(format!("{run_id}-{seed}.csv"))
}

/// `<out>/<method>/<run_id>-<seed>.eval.csv`
pub fn eval_path(out: &Path, run_id: &str, method: Method, seed: u64) -> PathBuf {
    out.join(method.as_str())
        .join(format!("{run_id}-{seed}.eval.csv"))
}

pub fn summary_path(out: &Path, run_id: &str) -> PathBuf {
    out.join(format!("{run_id}.summary.json"))
}

pub fn median_path(out: &Path, run_id: &str) -> PathBuf {
    out.join(format!("{run_id}.median.csv"))
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    Ok(())
}

/// Writes the trace CSV and, when the problem reports one, the evaluation
/// CSV next to it. Returns the written paths.
pub fn write_trace(out: &Path, run_id: &str, trace: &Trace) -> Result<Vec<PathBuf>> {
    let path = trace_path(out, run_id, trace.method, trace.seed);
    create_parent(&path)?;
    let mut w = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
    let method = trace.method.as_str();
    if trace.rows.is_empty() {
        w.write_record(TRACE_COLUMNS)
            .map_err(|e| io_err(&path, e))?;
    }
    for r in &trace.rows {
        w.serialize(CsvRow {
            run_id,
            method,
            seed: trace.seed,
            epoch: r.epoch,
            loss: r.loss,
            grad_norm: r.grad_norm,
            residual_norm: r.residual_norm,
            lr: r.lr,
            wall_ms: r.wall_ms,
        })
        .map_err(|e| io_err(&path, e))?;
    }
    w.flush().map_err(|e| io_err(&path, e))?;
    let mut written = vec![path];

    if trace.rows.first().is_some_and(|r| r.eval_loss.is_some()) {
        let path = eval_path(out, run_id, trace.method, trace.seed);
        let mut w = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
        for r in &trace.rows {
            w.serialize(EvalRow {
                run_id,
                method,
                seed: trace.seed,
                epoch: r.epoch,
                eval_loss: r.eval_loss.unwrap_or(f64::NAN),
            })
            .map_err(|e| io_err(&path, e))?;
        }
        w.flush().map_err(|e| io_err(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// The series milestones and medians are taken from: the evaluation loss
/// when the problem has one, the training loss otherwise.
pub fn metric_series(trace: &Trace) -> Vec<f64> {
    trace
        .rows
        .iter()
        .map(|r| r.eval_loss.unwrap_or(r.loss))
        .collect()
}

fn threshold_key(t: f64) -> String {
    format!("{t:e}")
}

#[derive(Clone, Debug, Serialize)]
pub struct CellSummary {
    pub method: Method,
    pub seed: u64,
    /// Training loss of the last recorded row.
    pub final_loss: Option<f64>,
    pub final_eval_loss: Option<f64>,
    pub diverged: bool,
    pub epochs_completed: usize,
    /// First epoch at which the metric reached each threshold.
    pub milestones: BTreeMap<String, Option<usize>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MilestoneStats {
    /// Median first-reach epoch over all seeds, counting never-reached
    /// (including diverged) seeds as infinite; `None` if that median is
    /// infinite.
    pub median_epoch: Option<f64>,
    pub reached: usize,
    pub success_rate: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MethodAggregate {
    pub seeds: usize,
    pub finished: usize,
    /// Statistics of the final metric over finished (non-diverged) seeds.
    pub median: Option<f64>,
    pub best: Option<f64>,
    pub worst: Option<f64>,
    pub milestones: BTreeMap<String, MilestoneStats>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub config_hash: String,
    pub run_id: String,
    /// `eval_loss` or `loss`: which series `aggregate` and milestones use.
    pub metric: String,
    pub cells: Vec<CellSummary>,
    pub aggregate: BTreeMap<Method, MethodAggregate>,
}

/// Median of the values, with infinities allowed; `None` for no values.
pub fn median(values: &[f64]) -> Option<f64> {
    quantile(values, 0.5)
}

/// Linear-interpolation quantile.
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi || v[lo] == v[hi] {
        return Some(v[lo]);
    }
    Some(v[lo] + (pos - lo as f64) * (v[hi] - v[lo]))
}

pub fn summarize(
    config_hash: &str,
    run_id: &str,
    thresholds: &[f64],
    traces: &[Trace],
) -> Result<Summary> {
    let metric = if traces
        .iter()
        .any(|t| t.rows.first().is_some_and(|r| r.eval_loss.is_some()))
    {
        "eval_loss"
    } else {
        "loss"
    };
    let mut cells = Vec::with_capacity(traces.len());
    for t in traces {
        let ms = milestones(&metric_series(t), thresholds)?;
        cells.push(CellSummary {
            method: t.method,
            seed: t.seed,
            final_loss: t.final_loss(),
            final_eval_loss: t.final_eval_loss(),
            diverged: t.diverged,
            epochs_completed: t.rows.len(),
            milestones: ms.into_iter().map(|(k, e)| (threshold_key(k), e)).collect(),
        });
    }

    let mut aggregate = BTreeMap::new();
    let mut methods: Vec<Method> = traces.iter().map(|t| t.method).collect();
    methods.sort();
    methods.dedup();
    for m in methods {
        let mine: Vec<&Trace> = traces.iter().filter(|t| t.method == m).collect();
        let finals: Vec<f64> = mine
            .iter()
            .filter(|t| !t.diverged)
            .filter_map(|t| metric_series(t).last().copied())
            .collect();
        let mut ms = BTreeMap::new();
        for &tau in thresholds {
            let key = threshold_key(tau);
            let epochs: Vec<f64> = cells
                .iter()
                .filter(|c| c.method == m)
                .map(|c| c.milestones[&key].map_or(f64::INFINITY, |e| e as f64))
                .collect();
            let reached = epochs.iter().filter(|e| e.is_finite()).count();
            ms.insert(
                key,
                MilestoneStats {
                    median_epoch: median(&epochs).filter(|e| e.is_finite()),
                    reached,
                    success_rate: reached as f64 / epochs.len() as f64,
                },
            );
        }
        aggregate.insert(
            m,
            MethodAggregate {
                seeds: mine.len(),
                finished: finals.len(),
                median: median(&finals),
                best: finals.iter().copied().reduce(f64::min),
                worst: finals.iter().copied().reduce(f64::max),
                milestones: ms,
            },
        );
    }
    Ok(Summary {
        config_hash: config_hash.to_string(),
        run_id: run_id.to_string(),
        metric: metric.to_string(),
        cells,
        aggregate,
    })
}

pub fn write_summary(out: &Path, summary: &Summary) -> Result<PathBuf> {
    let path = summary_path(out, &summary.run_id);
    create_parent(&path)?;
    let text = serde_json::to_string_pretty(summary).map_err(|e| io_err(&path, e))?;
    fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))?;
    Ok(path)
}

#[derive(Serialize)]
struct MedianRow {
    method: &'static str,
    epoch: usize,
    median: f64,
    q1: f64,
    q3: f64,
    seeds: usize,
}

/// Per-method median and interquartile range of the metric at every epoch,
/// over the seeds that recorded that epoch.
pub fn write_median_trace(out: &Path, run_id: &str, traces: &[Trace]) -> Result<PathBuf> {
    let path = median_path(out, run_id);
    create_parent(&path)?;
    let mut w = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
    let mut methods: Vec<Method> = traces.iter().map(|t| t.method).collect();
    methods.sort();
    methods.dedup();
    for m in methods {
        let series: Vec<Vec<f64>> = traces
            .iter()
            .filter(|t| t.method == m)
            .map(metric_series)
            .collect();
        let len = series.iter().map(Vec::len).max().unwrap_or(0);
        for epoch in 0..len {
            let vals: Vec<f64> = series
                .iter()
                .filter_map(|s| s.get(epoch).copied())
                .collect();
            w.serialize(MedianRow {
                method: m.as_str(),
                epoch,
                median: median(&vals).unwrap_or(f64::NAN),
                q1: quantile(&vals, 0.25).unwrap_or(f64::NAN),
                q3: quantile(&vals, 0.75).unwrap_or(f64::NAN),
                seeds: vals.len(),
            })
            .map_err(|e| io_err(&path, e))?;
        }
    }
    w.flush().map_err(|e| io_err(&path, e))?;
    Ok(path)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("-".to_string(), |x| format!("{x:.3e}"))
}

/// Side-by-side milestone table: one row per threshold, one column per
/// method with the median first-reach epoch and the success count.
pub fn milestone_table(summary: &Summary, thresholds: &[f64]) -> String {
    let methods: Vec<&Method> = summary.aggregate.keys().collect();
    let mut lines = Vec::new();
    let mut header = format!("{:<12}", "threshold");
    for m in &methods {
        header.push_str(&format!("  {:>24}", m.as_str()));
    }
    lines.push(header);
    for &tau in thresholds {
        let key = threshold_key(tau);
        let mut line = format!("{key:<12}");
        for m in &methods {
            let a = &summary.aggregate[*m];
            let s = &a.milestones[&key];
            let med = s
                .median_epoch
                .map_or("never".to_string(), |e| format!("{e}"));
            line.push_str(&format!(
                "  {:>24}",
                format!("{med} ({}/{})", s.reached, a.seeds)
            ));
        }
        lines.push(line);
    }
    let mut line = format!(
        "{:<12}",
        format!(
            "final {}",
            if summary.metric == "loss" {
                "loss"
            } else {
                "eval"
            }
        )
    );
    for m in &methods {
        line.push_str(&format!("  {:>24}", fmt_opt(summary.aggregate[*m].median)));
    }
    lines.push(line);
    lines.join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::TraceRow;

    fn trace(method: Method, seed: u64, losses: &[f64], diverged: bool) -> Trace {
        Trace {
            method,
            seed,
            rows: losses
                .iter()
                .enumerate()
                .map(|(epoch, &loss)| TraceRow {
                    epoch,
                    loss,
                    grad_norm: 1.0,
                    residual_norm: (2.0 * loss).sqrt(),
                    lr: 0.1,
                    wall_ms: epoch as f64,
                    eval_loss: None,
                    sigma_min: None,
                    sigma_max: None,
                })
                .collect(),
            diverged,
            failure: None,
            theta: vec![],
        }
    }

    #[test]
    fn quantiles() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(
            median(&[1.0, f64::INFINITY, f64::INFINITY]),
            Some(f64::INFINITY)
        );
        assert_eq!(median(&[]), None);
        assert_eq!(quantile(&[0.0, 1.0, 2.0, 3.0, 4.0], 0.25), Some(1.0));
    }

    #[test]
    fn aggregate_excludes_diverged_from_medians_but_not_success_rates() {
        let traces = vec![
            trace(Method::Gd, 0, &[1.0, 0.1, 0.001], false),
            trace(Method::Gd, 1, &[1.0, 0.5, 0.2], false),
            trace(Method::Gd, 2, &[1.0, 0.005], true),
        ];
        let s = summarize("h", "r", &[0.01, 0.002], &traces).unwrap();
        let a = &s.aggregate[&Method::Gd];
        assert_eq!((a.seeds, a.finished), (3, 2));
        assert_eq!(a.median, Some((0.001 + 0.2) / 2.0));
        assert_eq!((a.best, a.worst), (Some(0.001), Some(0.2)));
        let m = &a.milestones["1e-2"];
        assert_eq!(m.reached, 2);
        assert!((m.success_rate - 2.0 / 3.0).abs() < 1e-15);
        // epochs {2, inf, 1}
        assert_eq!(m.median_epoch, Some(2.0));
        assert_eq!(a.milestones["2e-3"].median_epoch, None);
        assert_eq!(s.cells[2].milestones["1e-2"], Some(1));
        assert_eq!(s.metric, "loss");
    }

    #[test]
    fn trace_csv_has_exact_header() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path();
        let paths = write_trace(dir, "demo", &trace(Method::Spgd, 3, &[1.0, 0.5], false)).unwrap();
        assert_eq!(paths.len(), 1);
        assert!(paths[0].ends_with("spgd/demo-3.csv"));
        let text = fs::read_to_string(&paths[0]).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), TRACE_COLUMNS.join(","));
        assert_eq!(
            lines.next().unwrap(),
            "demo,spgd,3,0,1.0,1.0,1.4142135623730951,0.1,0.0"
        );
    }
}
