//! Scenario files: flat `key=value` lines, list keys repeated.
//!
//! ```text
//! n_rows=200
//! n_cols=500
//! rank=10
//! rank=100
//! snr=0.5
//! snr=4
//! estimator=atn-gsure
//! estimator=tsvd-unknown
//! ```

use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::selection::DEFAULT_UNIVERSAL_SIMULATIONS;
use crate::simbench::{Estimator, NoiseFamily, ScenarioConfig};

/// Parsed scenario file; one scenario per listed rank.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub n_rows: usize,
    pub n_cols: usize,
    pub ranks: Vec<usize>,
    pub snr_values: Vec<f64>,
    pub noise: NoiseFamily,
    pub n_replicates: usize,
    pub estimators: Vec<Estimator>,
    pub seed: u64,
    pub universal_simulations: usize,
}

impl BenchmarkConfig {
    pub fn scenarios(&self) -> Vec<ScenarioConfig> {
        self.ranks
            .iter()
            .map(|&rank| ScenarioConfig {
                n_rows: self.n_rows,
                n_cols: self.n_cols,
                true_rank: rank,
                snr_values: self.snr_values.clone(),
                noise: self.noise,
                n_replicates: self.n_replicates,
                estimators: self.estimators.clone(),
                master_seed: self.seed,
                universal_simulations: self.universal_simulations,
            })
            .collect()
    }
}

pub fn read_config(path: &Path) -> Result<BenchmarkConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, path)
}

fn value<T: FromStr>(raw: &str, key: &str, path: &Path, line: usize) -> Result<T> {
    raw.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("invalid value '{raw}' for '{key}'"),
    })
}

/// Parses config text; `origin` only labels error messages.
pub fn parse_config(text: &str, origin: &Path) -> Result<BenchmarkConfig> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut n_rows = None;
    let mut n_cols = None;
    let mut ranks = Vec::new();
    let mut snr_values = Vec::new();
    let mut noise = NoiseFamily::Gaussian;
    let mut n_replicates = 50;
    let mut estimators = Vec::new();
    let mut seed = 0;
    let mut universal_simulations = DEFAULT_UNIVERSAL_SIMULATIONS;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, val) = content
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected key=value, got '{content}'")))?;
        let (key, val) = (key.trim(), val.trim());
        match key {
            "n_rows" => n_rows = Some(value(val, key, origin, line)?),
            "n_cols" => n_cols = Some(value(val, key, origin, line)?),
            "rank" => ranks.push(value(val, key, origin, line)?),
            "snr" => snr_values.push(value(val, key, origin, line)?),
            "noise" => noise = val.parse().map_err(|e: Error| err(line, e.to_string()))?,
            "replicates" => n_replicates = value(val, key, origin, line)?,
            "estimator" if val == "all" => estimators.extend(Estimator::ALL),
            "estimator" => estimators.push(val.parse().map_err(|e: Error| err(line, e.to_string()))?),
            "seed" => seed = value(val, key, origin, line)?,
            "nsim" => universal_simulations = value(val, key, origin, line)?,
            other => return Err(err(line, format!("unknown key '{other}'"))),
        }
    }
    let missing = |key: &str| err(0, format!("missing required key '{key}'"));
    let n_rows = n_rows.ok_or_else(|| missing("n_rows"))?;
    let n_cols = n_cols.ok_or_else(|| missing("n_cols"))?;
    if ranks.is_empty() {
        return Err(missing("rank"));
    }
    if estimators.is_empty() {
        return Err(missing("estimator"));
    }
    if snr_values.is_empty() {
        snr_values = vec![0.5, 1.0, 2.0, 4.0];
    }
    let cfg = BenchmarkConfig {
        n_rows,
        n_cols,
        ranks,
        snr_values,
        noise,
        n_replicates,
        estimators,
        seed,
        universal_simulations,
    };
    for s in cfg.scenarios() {
        s.validate()?;
    }
    Ok(cfg)
}
