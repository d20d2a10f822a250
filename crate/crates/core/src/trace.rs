//! Run traces and their on-disk layout: `trace.csv` (one row per
//! evaluation), `convergence.csv` (incumbent curve), and `summary.json`
//! (config echo plus outcome).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};

/// One objective evaluation: inputs and outputs are reported in the
/// objective's original units and sign, regardless of what the engine saw.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based evaluation index, initialization included.
    pub t: usize,
    pub x: Vec<f64>,
    pub y: f64,
    /// Best objective value after this evaluation.
    pub best: f64,
    /// Concentration in effect at this step.
    pub alpha: f64,
    /// Active regime count of the surrogate used at this step (1 while the
    /// design is still being initialized, and for single-model baselines).
    pub regimes: usize,
    /// Wall-clock milliseconds spent on this iteration.
    pub ms: f64,
    /// True when the model or acquisition failed and the query fell back to
    /// a random in-bounds point.
    pub fallback: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunTrace {
    pub records: Vec<IterationRecord>,
    pub best_point: Vec<f64>,
    pub best_value: f64,
    pub evaluations: usize,
    /// True when the initial design came from Latin hypercube sampling
    /// because the requested dimension exceeds the Sobol table.
    pub lhs_fallback: bool,
    /// Iteration indices that used the random-query fallback.
    pub fallback_iterations: Vec<usize>,
}

impl RunTrace {
    /// Incumbent curve as (t, best) pairs.
    pub fn convergence(&self) -> Vec<(usize, f64)> {
        self.records.iter().map(|r| (r.t, r.best)).collect()
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    version: &'static str,
    config: &'a RunConfig,
    best_point: &'a [f64],
    best_value: f64,
    evaluations: usize,
    lhs_fallback: bool,
    fallback_iterations: &'a [usize],
}

fn fmt_float(v: f64) -> String {
    format!("{v:.17e}")
}

/// Writes `trace.csv`, `convergence.csv`, and `summary.json` into `dir`,
/// creating it if needed.
pub fn write_trace(trace: &RunTrace, config: &RunConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let dim = config.dim;

    let trace_path = dir.join("trace.csv");
    let mut w = csv::Writer::from_path(&trace_path)
        .map_err(|e| Error::io(trace_path.clone(), std::io::Error::other(e)))?;
    let mut header: Vec<String> = vec!["t".into()];
    header.extend((1..=dim).map(|j| format!("x_{j}")));
    header.extend(["y", "best", "alpha", "regimes", "ms"].map(String::from));
    let write_err = |e: csv::Error| Error::io(trace_path.clone(), std::io::Error::other(e));
    w.write_record(&header).map_err(write_err)?;
    for r in &trace.records {
        let mut row: Vec<String> = vec![r.t.to_string()];
        row.extend(r.x.iter().copied().map(fmt_float));
        row.push(fmt_float(r.y));
        row.push(fmt_float(r.best));
        row.push(fmt_float(r.alpha));
        row.push(r.regimes.to_string());
        row.push(format!("{:.3}", r.ms));
        w.write_record(&row).map_err(write_err)?;
    }
    w.flush().map_err(|e| Error::io(trace_path.clone(), e))?;

    let conv_path = dir.join("convergence.csv");
    let mut w = csv::Writer::from_path(&conv_path)
        .map_err(|e| Error::io(conv_path.clone(), std::io::Error::other(e)))?;
    let conv_err = |e: csv::Error| Error::io(conv_path.clone(), std::io::Error::other(e));
    w.write_record(["t", "best"]).map_err(conv_err)?;
    for (t, best) in trace.convergence() {
        w.write_record([t.to_string(), fmt_float(best)]).map_err(conv_err)?;
    }
    w.flush().map_err(|e| Error::io(conv_path.clone(), e))?;

    let summary = Summary {
        version: env!("CARGO_PKG_VERSION"),
        config,
        best_point: &trace.best_point,
        best_value: trace.best_value,
        evaluations: trace.evaluations,
        lhs_fallback: trace.lhs_fallback,
        fallback_iterations: &trace.fallback_iterations,
    };
    let summary_path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::io(summary_path.clone(), std::io::Error::other(e)))?;
    std::fs::write(&summary_path, text).map_err(|e| Error::io(summary_path, e))?;
    Ok(())
}
