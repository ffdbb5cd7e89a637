use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::master::{dispatch, DispatchOptions};
use super::protocol::{DatasetRef, JobSpec, RunRecord};
use crate::error::{Error, Result};
use crate::grid::{split_runs, ExperimentConfig};

/// `S = T1 / Tp`.
pub fn speedup(t1: f64, tp: f64) -> Result<f64> {
    if !(t1 > 0.0 && tp > 0.0) {
        return Err(Error::precondition(format!(
            "times must be positive (T1 = {t1}, Tp = {tp})"
        )));
    }
    Ok(t1 / tp)
}

/// Cuts `x` to `places` decimals, the way the published speedup table
/// reports its ratios (349/177 = 1.97175 appears as 1.9717).
pub fn truncate_decimals(x: f64, places: i32) -> f64 {
    let scale = 10f64.powi(places);
    // the nudge keeps values such as 0.99 from flooring to 0.9899
    (x * scale + 1e-9).floor() / scale
}

/// `E = S / P`.
pub fn efficiency(speedup: f64, nodes: usize) -> f64 {
    assert!(nodes >= 1, "efficiency needs at least one node");
    speedup / nodes as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub nodes: usize,
    pub seconds: Option<f64>,
    pub speedup: Option<f64>,
    pub efficiency: Option<f64>,
    /// Set when any job at this node count failed.
    pub failure: Option<String>,
    #[serde(skip, default)]
    pub runs: Vec<RunRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub dataset: String,
    pub config: String,
    pub total_runs: usize,
    pub master_seed: u64,
    pub rows: Vec<BenchRow>,
    /// Node count with the highest efficiency above one node.
    pub optimal_nodes: Option<usize>,
}

impl BenchReport {
    /// Fills in speedup, efficiency and the optimum from the raw times.
    pub fn from_times(
        dataset: impl Into<String>,
        config: impl Into<String>,
        total_runs: usize,
        master_seed: u64,
        mut rows: Vec<BenchRow>,
    ) -> Result<Self> {
        let t1 = rows.iter().find(|r| r.nodes == 1).and_then(|r| r.seconds);
        for row in &mut rows {
            match (t1, row.seconds) {
                (Some(t1), Some(tp)) => {
                    let s = speedup(t1, tp)?;
                    row.speedup = Some(s);
                    row.efficiency = Some(efficiency(s, row.nodes));
                }
                _ => {
                    row.speedup = None;
                    row.efficiency = None;
                }
            }
        }
        let optimal_nodes = rows
            .iter()
            .filter(|r| r.nodes > 1)
            .filter_map(|r| r.efficiency.map(|e| (r.nodes, e)))
            .reduce(|best, x| if x.1 > best.1 { x } else { best })
            .map(|(p, _)| p)
            .or_else(|| t1.map(|_| 1));
        Ok(BenchReport {
            dataset: dataset.into(),
            config: config.into(),
            total_runs,
            master_seed,
            rows,
            optimal_nodes,
        })
    }

    pub fn row(&self, nodes: usize) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.nodes == nodes)
    }

    pub fn is_partial(&self) -> bool {
        self.rows.iter().any(|r| r.failure.is_some())
    }

    /// `P,Tp,S,E,status` rows for external plotting.
    pub fn to_plot_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        let mut out = String::from("p,tp_seconds,speedup,efficiency,status\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.nodes,
                fmt(r.seconds),
                fmt(r.speedup),
                fmt(r.efficiency),
                if r.failure.is_some() { "failed" } else { "ok" }
            );
        }
        out
    }

    /// Aligned table in the layout of the published speedup table.
    pub fn to_table(&self) -> String {
        let cell = |v: Option<f64>, prec: usize| {
            v.map(|x| format!("{:.prec$}", truncate_decimals(x, prec as i32)))
                .unwrap_or_else(|| "-".into())
        };
        let mut out = format!(
            "{} config {}: {} runs, master seed {}\n{:>6} {:>12} {:>9} {:>10}\n",
            self.dataset, self.config, self.total_runs, self.master_seed, "nodes", "time (s)", "speedup", "efficiency"
        );
        for r in &self.rows {
            let _ = write!(
                out,
                "{:>6} {:>12} {:>9} {:>10}",
                r.nodes,
                cell(r.seconds, 3),
                cell(r.speedup, 4),
                cell(r.efficiency, 4)
            );
            if let Some(f) = &r.failure {
                let _ = write!(out, "  FAILED: {f}");
            }
            out.push('\n');
        }
        match self.optimal_nodes {
            Some(p) => {
                let _ = writeln!(out, "optimal node count: {p}");
            }
            None => out.push_str("optimal node count: undetermined\n"),
        }
        out
    }
}

/// Runs the same `total_runs` seeded runs once per node count, splitting
/// them over the first `P` endpoints, and times each execution at the
/// master. A one-node baseline is always included.
pub fn bench(
    config: &ExperimentConfig,
    dataset: &DatasetRef,
    total_runs: usize,
    master_seed: u64,
    nodes: &[usize],
    endpoints: &[String],
    options: &DispatchOptions,
) -> Result<BenchReport> {
    let mut plist: Vec<usize> = nodes.to_vec();
    plist.push(1);
    plist.sort_unstable();
    plist.dedup();
    if plist[0] == 0 {
        return Err(Error::precondition("node counts must be positive"));
    }
    let max_p = *plist.last().expect("non-empty");
    if endpoints.len() < max_p {
        return Err(Error::precondition(format!(
            "bench up to {max_p} nodes needs {max_p} workers, got {}",
            endpoints.len()
        )));
    }
    if total_runs < max_p {
        return Err(Error::precondition(format!(
            "{total_runs} runs cannot occupy {max_p} nodes"
        )));
    }
    let mut rows = Vec::new();
    for p in plist {
        let jobs: Vec<JobSpec> = split_runs(total_runs, p, master_seed)?
            .into_iter()
            .map(|a| JobSpec::new(format!("bench-p{p}-w{}", a.worker), config.clone(), a, dataset.clone()))
            .collect();
        let report = dispatch(&endpoints[..p], &jobs, options)?;
        let failure = (!report.is_complete()).then(|| {
            report
                .failures
                .iter()
                .map(|f| format!("{} ({}): {}", f.job_id, f.endpoint, f.message))
                .collect::<Vec<_>>()
                .join("; ")
        });
        rows.push(BenchRow {
            nodes: p,
            seconds: failure.is_none().then_some(report.wall_seconds),
            speedup: None,
            efficiency: None,
            failure,
            runs: report.runs(),
        });
    }
    BenchReport::from_times(
        config.dataset.clone(),
        config.index.to_string(),
        total_runs,
        master_seed,
        rows,
    )
}
