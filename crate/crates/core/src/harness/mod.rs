//! Experiment orchestration: training loop, baselines, metrics files,
//! aggregation and the analysis reports behind the CLI.

pub mod aggregate;
pub mod analyze;
pub mod config;
pub mod run;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use aggregate::{aggregate_dir, aggregate_records, iqm, read_metrics, sign_test_greater, std_error, FinalRow, Summary, SummaryRow};
pub use config::{build_instance, NoiseShape, NoiseSpec, QReprKind, RunConfig};
pub use run::{run_experiment, simulate, simulate_on, MetricsRecord, RunOutput, CSV_HEADER};

/// Who talks to whom after warm-up.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    LearnedComm,
    NoComm,
    /// Noisy arms copy from their nearest noise-free arm. The only strategy
    /// that may look at which arms are noisy.
    FixedOracleComm,
    NearestNeighborComm,
    RandomComm,
    /// Same arms, every reward offset removed.
    NoNoise,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::LearnedComm,
        Strategy::NoComm,
        Strategy::FixedOracleComm,
        Strategy::NearestNeighborComm,
        Strategy::RandomComm,
        Strategy::NoNoise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::LearnedComm => "learned_comm",
            Strategy::NoComm => "no_comm",
            Strategy::FixedOracleComm => "fixed_oracle_comm",
            Strategy::NearestNeighborComm => "nearest_neighbor_comm",
            Strategy::RandomComm => "random_comm",
            Strategy::NoNoise => "no_noise",
        }
    }

    /// `all` or a comma-separated list of names.
    pub fn parse_list(text: &str) -> Result<Vec<Strategy>> {
        if text.trim() == "all" {
            return Ok(Strategy::ALL.to_vec());
        }
        let mut out = Vec::new();
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let s: Strategy = part.parse()?;
            if !out.contains(&s) {
                out.push(s);
            }
        }
        if out.is_empty() {
            return Err(Error::config("empty strategy list"));
        }
        Ok(out)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::config(format!("unknown strategy '{s}'")))
    }
}

/// Seed lists: `a..b` and `a..=b` (both inclusive of `b`), or `1,2,5`.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let t = text.trim();
    let bad = || Error::config(format!("cannot parse seed list '{text}'"));
    if let Some((a, b)) = t.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let lo: u64 = a.trim().parse().map_err(|_| bad())?;
        let hi: u64 = b.trim().parse().map_err(|_| bad())?;
        if hi < lo {
            return Err(bad());
        }
        return Ok((lo..=hi).collect());
    }
    let seeds: Vec<u64> = t
        .split(',')
        .map(|p| p.trim().parse().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}
