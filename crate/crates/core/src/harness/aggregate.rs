//! Seed-level aggregation of metrics CSVs.
//!
//! IQM convention: sort, drop `floor(n / 4)` values from each end, average
//! the rest. Undefined below four seeds.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::run::{MetricsRecord, CSV_HEADER};
use super::Strategy;
use crate::error::{Error, Result};

pub fn iqm(values: &[f64]) -> Option<f64> {
    let n = values.len();
    if n < 4 {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let cut = n / 4;
    let mid = &v[cut..n - cut];
    Some(mid.iter().sum::<f64>() / mid.len() as f64)
}

/// Sample standard deviation over `sqrt(n)`.
pub fn std_error(values: &[f64]) -> Option<f64> {
    let n = values.len();
    if n < 2 {
        return None;
    }
    let m = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    Some((var / n as f64).sqrt())
}

/// One-sided paired sign test of `a > b`. Ties are dropped. Returns
/// `(wins, non-tied pairs, p)` with `p = P(Bin(n, 1/2) >= wins)`.
pub fn sign_test_greater(a: &[f64], b: &[f64]) -> (usize, usize, f64) {
    let mut wins = 0;
    let mut n = 0;
    for (x, y) in a.iter().zip(b) {
        if x != y {
            n += 1;
            wins += (x > y) as usize;
        }
    }
    let mut p = 0.0;
    for k in wins..=n {
        p += binom(n, k) * 0.5f64.powi(n as i32);
    }
    (wins, n, p.min(1.0))
}

fn binom(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub strategy: Strategy,
    pub epoch: usize,
    pub n_seeds: usize,
    pub iqm: Option<f64>,
    pub mean: f64,
    pub std_err: Option<f64>,
}

/// Final-epoch scores. `pct_of_no_noise` is `100 * R / R_no_noise`;
/// `normalized_vs_start` is `100 * (R - R_start) / (R_no_noise - R_start)`
/// with `R_start` the strategy's own IQM at the communication start epoch.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FinalRow {
    pub strategy: Strategy,
    pub epoch: usize,
    pub n_seeds: usize,
    pub iqm: Option<f64>,
    pub std_err: Option<f64>,
    pub pct_of_no_noise: Option<f64>,
    pub normalized_vs_start: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    pub final_rows: Vec<FinalRow>,
}

/// Returns per strategy: epoch -> values in seed order.
fn group(records: &[MetricsRecord]) -> Result<BTreeMap<Strategy, BTreeMap<usize, Vec<(u64, f64)>>>> {
    let mut by: BTreeMap<Strategy, BTreeMap<u64, BTreeMap<usize, f64>>> = BTreeMap::new();
    for r in records {
        let seeds = by.entry(r.strategy).or_default();
        if seeds.entry(r.seed).or_default().insert(r.epoch, r.eval_return).is_some() {
            return Err(Error::Alignment(format!(
                "duplicate record for {} seed {} epoch {}",
                r.strategy, r.seed, r.epoch
            )));
        }
    }
    let mut out = BTreeMap::new();
    for (strategy, seeds) in by {
        let mut epochs: Option<BTreeSet<usize>> = None;
        for (seed, rows) in &seeds {
            let these: BTreeSet<usize> = rows.keys().copied().collect();
            match &epochs {
                None => epochs = Some(these),
                Some(e) if *e != these => {
                    return Err(Error::Alignment(format!("{strategy}: seed {seed} has a different epoch set")));
                }
                _ => {}
            }
        }
        let mut per_epoch: BTreeMap<usize, Vec<(u64, f64)>> = BTreeMap::new();
        for (seed, rows) in seeds {
            for (epoch, v) in rows {
                per_epoch.entry(epoch).or_default().push((seed, v));
            }
        }
        out.insert(strategy, per_epoch);
    }
    Ok(out)
}

pub fn aggregate_records(records: &[MetricsRecord], comm_start_epoch: usize) -> Result<Summary> {
    let grouped = group(records)?;
    let mut rows = Vec::new();
    for (&strategy, epochs) in &grouped {
        for (&epoch, vals) in epochs {
            let v: Vec<f64> = vals.iter().map(|x| x.1).collect();
            rows.push(SummaryRow {
                strategy,
                epoch,
                n_seeds: v.len(),
                iqm: iqm(&v),
                mean: v.iter().sum::<f64>() / v.len() as f64,
                std_err: std_error(&v),
            });
        }
    }
    let lookup = |s: Strategy, e: usize| rows.iter().find(|r| r.strategy == s && r.epoch == e).and_then(|r| r.iqm);
    let mut final_rows = Vec::new();
    for (&strategy, epochs) in &grouped {
        let Some((&epoch, vals)) = epochs.iter().next_back() else {
            continue;
        };
        let v: Vec<f64> = vals.iter().map(|x| x.1).collect();
        let r = iqm(&v);
        let clean = lookup(Strategy::NoNoise, epoch);
        let start = lookup(strategy, comm_start_epoch);
        let pct = match (r, clean) {
            (Some(r), Some(c)) if c != 0.0 => Some(100.0 * r / c),
            _ => None,
        };
        let norm = match (r, clean, start) {
            (Some(r), Some(c), Some(s)) if c != s => Some(100.0 * (r - s) / (c - s)),
            _ => None,
        };
        final_rows.push(FinalRow {
            strategy,
            epoch,
            n_seeds: v.len(),
            iqm: r,
            std_err: std_error(&v),
            pct_of_no_noise: pct,
            normalized_vs_start: norm,
        });
    }
    Ok(Summary { rows, final_rows })
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRecord>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::config(format!("{}: unexpected CSV header", path.display())));
    }
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Metrics files in `dir`: names of the form `{strategy}_s{seed}.csv`.
pub fn metrics_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let Some(stem) = name.strip_suffix(".csv") else {
            continue;
        };
        let Some((strategy, seed)) = stem.rsplit_once("_s") else {
            continue;
        };
        if strategy.parse::<Strategy>().is_ok() && seed.parse::<u64>().is_ok() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub fn aggregate_dir(dir: &Path, comm_start_epoch: usize) -> Result<Summary> {
    let files = metrics_files(dir)?;
    if files.is_empty() {
        return Err(Error::config(format!("no metrics CSVs in {}", dir.display())));
    }
    let mut records = Vec::new();
    for f in files {
        records.extend(read_metrics(&f)?);
    }
    aggregate_records(&records, comm_start_epoch)
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x}"))
}

fn opt_md(v: Option<f64>, digits: usize) -> String {
    v.map_or("n/a".into(), |x| format!("{x:.digits$}"))
}

impl Summary {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("strategy,epoch,n_seeds,iqm,mean,std_err\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{},{},{}", r.strategy, r.epoch, r.n_seeds, opt(r.iqm), r.mean, opt(r.std_err));
        }
        s
    }

    pub fn final_csv(&self) -> String {
        let mut s = String::from("strategy,epoch,n_seeds,iqm,std_err,pct_of_no_noise,normalized_vs_start\n");
        for r in &self.final_rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.strategy,
                r.epoch,
                r.n_seeds,
                opt(r.iqm),
                opt(r.std_err),
                opt(r.pct_of_no_noise),
                opt(r.normalized_vs_start)
            );
        }
        s
    }

    /// Final-epoch table followed by the IQM curve per strategy.
    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| strategy | epoch | seeds | IQM | SE | % of No-Noise | normalized |\n|---|---|---|---|---|---|---|\n");
        for r in &self.final_rows {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} | {} | {} |",
                r.strategy,
                r.epoch,
                r.n_seeds,
                opt_md(r.iqm, 3),
                opt_md(r.std_err, 3),
                opt_md(r.pct_of_no_noise, 1),
                opt_md(r.normalized_vs_start, 1)
            );
        }
        s.push_str("\n| strategy | epoch | IQM | SE |\n|---|---|---|---|\n");
        for r in &self.rows {
            let _ = writeln!(s, "| {} | {} | {} | {} |", r.strategy, r.epoch, opt_md(r.iqm, 3), opt_md(r.std_err, 3));
        }
        s
    }
}
