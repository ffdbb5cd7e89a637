use std::fmt::Write as _;

use punn::cluster::RunRecord;
use punn::grid::ExperimentConfig;
use punn::stats::{mean, summarize, RunSummary};
use punn::Result;
use serde::Serialize;

/// One grid column's test-CCR summary, as a result-file row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigSummary {
    pub dataset: String,
    pub config: String,
    pub topology: String,
    pub neu: usize,
    pub gen: usize,
    pub alpha2: f64,
    pub runs: usize,
    pub mean: f64,
    /// Empty for a single run.
    pub std: Option<f64>,
    pub best: f64,
    pub worst: f64,
    pub mean_connections: f64,
    pub is_best: bool,
}

pub fn summarize_grid(
    configs: &[ExperimentConfig],
    records: &[RunRecord],
    n_inputs: usize,
    n_outputs: usize,
) -> Result<Vec<ConfigSummary>> {
    let mut rows = Vec::new();
    for cfg in configs {
        let label = cfg.index.to_string();
        let mine: Vec<&RunRecord> = records.iter().filter(|r| r.config == label).collect();
        if mine.is_empty() {
            continue;
        }
        let ccr: Vec<f64> = mine.iter().map(|r| r.test_ccr).collect();
        let conns: Vec<f64> = mine.iter().map(|r| r.connections as f64).collect();
        let s = if ccr.len() == 1 {
            RunSummary::single(ccr[0])
        } else {
            summarize(&ccr)?
        };
        rows.push(ConfigSummary {
            dataset: cfg.dataset.clone(),
            config: label,
            topology: format!("{}:{}:{}", n_inputs, cfg.neu(), n_outputs),
            neu: cfg.neu(),
            gen: cfg.gen(),
            alpha2: cfg.alpha2(),
            runs: s.n,
            mean: s.mean,
            std: s.std,
            best: s.best,
            worst: s.worst,
            mean_connections: mean(&conns),
            is_best: false,
        });
    }
    if let Some(i) = best_index(&rows) {
        rows[i].is_best = true;
    }
    Ok(rows)
}

/// Highest mean test CCR; ties go to fewer mean connections, then to the
/// earlier column.
pub fn best_index(rows: &[ConfigSummary]) -> Option<usize> {
    (0..rows.len()).reduce(|b, i| {
        let (x, y) = (&rows[i], &rows[b]);
        if x.mean > y.mean || (x.mean == y.mean && x.mean_connections < y.mean_connections) {
            i
        } else {
            b
        }
    })
}

pub fn grid_table(rows: &[ConfigSummary]) -> String {
    let mut out = format!(
        "{:<7} {:<10} {:>4} {:>5} {:>6} {:>9} {:>9} {:>9} {:>9} {:>8}\n",
        "config", "topology", "neu", "gen", "alpha2", "mean", "std.dev.", "best", "worst", "conn."
    );
    for r in rows {
        let std = r.std.map(|s| format!("{s:.4}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "{:<7} {:<10} {:>4} {:>5} {:>6} {:>9.4} {:>9} {:>9.4} {:>9.4} {:>8.2}{}",
            r.config,
            r.topology,
            r.neu,
            r.gen,
            r.alpha2,
            r.mean,
            std,
            r.best,
            r.worst,
            r.mean_connections,
            if r.is_best { "  <- best" } else { "" }
        );
    }
    out
}
