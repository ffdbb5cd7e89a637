//! Settings layering: command-line flags over a TOML file over built-in
//! defaults. The fully resolved settings use the same shape as the file,
//! so the echoed header can be fed back with `--config`.

use std::fs;
use std::path::{Path, PathBuf};

use punn::evolution::EAParams;
use punn::grid::{base_config_for, expand_grid_2param, expand_grid_3param, BaseConfig, ConfigIndex, ExperimentConfig};
use punn::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub data: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    /// A saved split; replaces `data`/`schema` when given.
    pub split: Option<PathBuf>,
    pub train_ratio: Option<f64>,
    pub split_seed: Option<u64>,
    pub seed: Option<u64>,
    pub neu: Option<usize>,
    pub gen: Option<usize>,
    pub alpha2: Option<f64>,
    /// Grid column such as `4` or `3*`.
    pub column: Option<String>,
    pub mode: Option<u8>,
    pub runs: Option<usize>,
    pub nodes: Option<Vec<usize>>,
    pub workers: Option<Vec<String>>,
    pub local_workers: Option<usize>,
    pub inline_dataset: Option<bool>,
    pub connect_timeout_secs: Option<f64>,
    pub threads: Option<usize>,
    pub ea: Option<EAParams>,
}

macro_rules! overlay_fields {
    ($low:ident, $high:ident; $($f:ident),*) => {
        Settings { $($f: $high.$f.or($low.$f)),* }
    };
}

impl Settings {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::ingestion(None, format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::ingestion(None, format!("bad config {}: {e}", path.display())))
    }

    /// Field-wise: `higher` wins wherever it is set.
    pub fn overlay(self, higher: Settings) -> Settings {
        let low = self;
        overlay_fields!(low, higher; data, schema, split, train_ratio, split_seed, seed, neu, gen, alpha2,
            column, mode, runs, nodes, workers, local_workers, inline_dataset, connect_timeout_secs, threads, ea)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("settings always serialize")
    }

    pub fn ea(&self) -> EAParams {
        self.ea.clone().unwrap_or_default()
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    /// Fills the distributed parameters from the dataset's published base
    /// configuration (or the common defaults for unknown datasets) and
    /// every other unset field from the built-in defaults.
    pub fn resolve(mut self, dataset: &str) -> Settings {
        let common = self.ea();
        if let Ok(base) = base_config_for(dataset) {
            self.neu = self.neu.or(Some(base.neu));
            self.gen = self.gen.or(Some(base.gen));
            self.alpha2 = self.alpha2.or(base.alpha2);
        } else {
            self.neu = self.neu.or(Some(common.max_hidden));
            self.gen = self.gen.or(Some(common.max_generations));
            self.alpha2 = self.alpha2.or(Some(common.alpha2_init));
        }
        self.train_ratio = self.train_ratio.or(Some(punn::data::DEFAULT_TRAIN_RATIO));
        self.split_seed = self.split_seed.or(Some(1));
        self.seed = self.seed.or(Some(1));
        // keep the echoed [ea] table consistent with the base values
        let mut ea = common;
        ea.max_hidden = self.neu.unwrap_or(ea.max_hidden);
        ea.max_generations = self.gen.unwrap_or(ea.max_generations);
        ea.alpha2_init = self.alpha2.unwrap_or(ea.alpha2_init);
        self.ea = Some(ea);
        self
    }

    pub fn base_config(&self, dataset: &str) -> Result<BaseConfig> {
        let base = BaseConfig {
            dataset: dataset.to_string(),
            neu: self.neu.ok_or_else(|| Error::precondition("neu unresolved"))?,
            gen: self.gen.ok_or_else(|| Error::precondition("gen unresolved"))?,
            alpha2: self.alpha2,
            common: self.ea(),
        };
        base.validate()?;
        Ok(base)
    }

    /// The selected grid column, or the base configuration itself.
    pub fn experiment(&self, dataset: &str) -> Result<ExperimentConfig> {
        let base = self.base_config(dataset)?;
        match &self.column {
            None => Ok(base.as_config(false)),
            Some(c) => select_column(&base, c.parse()?),
        }
    }
}

pub fn select_column(base: &BaseConfig, index: ConfigIndex) -> Result<ExperimentConfig> {
    let grid = if index.two_param {
        expand_grid_2param(base)?
    } else {
        expand_grid_3param(base)?
    };
    Ok(grid[usize::from(index.position) - 1].clone())
}
