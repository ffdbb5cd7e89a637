//! Experimental-design grids (eight transformed configurations per base)
//! and balanced run splitting for processing distribution.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::EAParams;
use crate::rng;

/// Per-dataset starting point for a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseConfig {
    pub dataset: String,
    pub neu: usize,
    pub gen: usize,
    /// Absent when only `neu` and `gen` are distributed.
    pub alpha2: Option<f64>,
    pub common: EAParams,
}

impl BaseConfig {
    pub fn new(dataset: impl Into<String>, neu: usize, gen: usize, alpha2: Option<f64>) -> Result<Self> {
        let base = BaseConfig {
            dataset: dataset.into(),
            neu,
            gen,
            alpha2,
            common: EAParams::default(),
        };
        base.validate()?;
        Ok(base)
    }

    pub fn validate(&self) -> Result<()> {
        // gen = 0 is allowed: the run returns the best initial network
        if self.neu < 1 {
            return Err(Error::precondition(format!(
                "base config needs neu >= 1 (got {})",
                self.neu
            )));
        }
        if let Some(a) = self.alpha2 {
            if !(a > 0.0) {
                return Err(Error::precondition(format!("alpha2 must be positive, got {a}")));
            }
        }
        Ok(())
    }

    /// Configuration 1 of either grid: the base itself.
    pub fn as_config(&self, two_param: bool) -> ExperimentConfig {
        ExperimentConfig::resolve(
            self,
            ConfigIndex { position: 1, two_param },
            self.neu,
            self.gen,
            self.alpha2,
        )
    }
}

/// Base configurations of the five benchmark datasets.
pub fn base_config_for(dataset: &str) -> Result<BaseConfig> {
    let (neu, gen, alpha2) = match dataset.to_ascii_lowercase().as_str() {
        "balance" => (5, 150, Some(1.0)),
        "cancer" => (2, 100, Some(1.0)),
        "pima" => (3, 120, Some(1.0)),
        "hypothyroid" => (3, 500, None),
        "waveform" => (3, 500, None),
        _ => {
            return Err(Error::precondition(format!(
                "no built-in base configuration for {dataset:?}; supply neu, gen and alpha2"
            )))
        }
    };
    BaseConfig::new(dataset, neu, gen, alpha2)
}

/// Column of a grid: `1..=8`, starred for the two-parameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ConfigIndex {
    pub position: u8,
    pub two_param: bool,
}

impl fmt::Display for ConfigIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.position, if self.two_param { "*" } else { "" })
    }
}

impl std::str::FromStr for ConfigIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (digits, two_param) = match s.strip_suffix('*') {
            Some(d) => (d, true),
            None => (s, false),
        };
        match digits.parse::<u8>() {
            Ok(position @ 1..=8) => Ok(ConfigIndex { position, two_param }),
            _ => Err(Error::precondition(format!("bad configuration index {s:?}"))),
        }
    }
}

/// One fully resolved cell of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub index: ConfigIndex,
    pub dataset: String,
    pub params: EAParams,
}

impl ExperimentConfig {
    fn resolve(base: &BaseConfig, index: ConfigIndex, neu: usize, gen: usize, alpha2: Option<f64>) -> Self {
        let mut params = base.common.clone();
        params.max_hidden = neu;
        params.max_generations = gen;
        if let Some(a) = alpha2 {
            params.alpha2_init = a;
        }
        ExperimentConfig {
            index,
            dataset: base.dataset.clone(),
            params,
        }
    }

    pub fn neu(&self) -> usize {
        self.params.max_hidden
    }

    pub fn gen(&self) -> usize {
        self.params.max_generations
    }

    pub fn alpha2(&self) -> f64 {
        self.params.alpha2_init
    }
}

fn reduced_generations(gen: usize) -> usize {
    (0.8 * gen as f64).round() as usize
}

/// The three-parameter grid: `neu | neu+1` x `gen | 0.8 gen` x
/// `alpha2 | 1.5 alpha2`, with `neu` varying fastest, then `alpha2`.
pub fn expand_grid_3param(base: &BaseConfig) -> Result<Vec<ExperimentConfig>> {
    base.validate()?;
    let alpha2 = base.alpha2.ok_or_else(|| {
        Error::precondition(format!(
            "{} has no alpha2 in its base configuration; use the 2-parameter grid",
            base.dataset
        ))
    })?;
    Ok((1..=8u8)
        .map(|position| {
            let p = usize::from(position - 1);
            let neu = base.neu + p % 2;
            let a2 = if (p / 2) % 2 == 0 { alpha2 } else { 1.5 * alpha2 };
            let gen = if p < 4 { base.gen } else { reduced_generations(base.gen) };
            ExperimentConfig::resolve(
                base,
                ConfigIndex {
                    position,
                    two_param: false,
                },
                neu,
                gen,
                Some(a2),
            )
        })
        .collect())
}

/// The two-parameter grid: `neu + {0,1,2,3}` x `gen | 0.8 gen`.
pub fn expand_grid_2param(base: &BaseConfig) -> Result<Vec<ExperimentConfig>> {
    base.validate()?;
    Ok((1..=8u8)
        .map(|position| {
            let p = usize::from(position - 1);
            let neu = base.neu + p % 4;
            let gen = if p < 4 { base.gen } else { reduced_generations(base.gen) };
            ExperimentConfig::resolve(
                base,
                ConfigIndex {
                    position,
                    two_param: true,
                },
                neu,
                gen,
                base.alpha2,
            )
        })
        .collect())
}

/// Runs handed to one worker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunAssignment {
    pub worker: usize,
    /// `(run index, seed)` pairs in run order.
    pub runs: Vec<(usize, u64)>,
}

impl RunAssignment {
    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        self.runs.iter().map(|&(_, s)| s)
    }
}

/// Contiguous balanced blocks; run `i` always gets seed `master_seed + i`
/// whatever the number of workers.
pub fn split_runs(total_runs: usize, workers: usize, master_seed: u64) -> Result<Vec<RunAssignment>> {
    if total_runs == 0 || workers == 0 {
        return Err(Error::precondition(format!(
            "need at least one run and one worker (got {total_runs} runs, {workers} workers)"
        )));
    }
    let base = total_runs / workers;
    let extra = total_runs % workers;
    let mut next = 0;
    Ok((0..workers)
        .map(|worker| {
            let size = base + usize::from(worker < extra);
            let runs = (next..next + size)
                .map(|i| (i, master_seed.wrapping_add(i as u64)))
                .collect();
            next += size;
            RunAssignment { worker, runs }
        })
        .collect())
}

/// Master seed of one grid column, so each configuration gets its own
/// seed stream.
pub fn config_master_seed(master_seed: u64, index: ConfigIndex) -> u64 {
    rng::derive_seed(master_seed, &[u64::from(index.position), u64::from(index.two_param)])
}
