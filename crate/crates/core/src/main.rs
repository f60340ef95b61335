use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use rmab_comm::harness::analyze::{run_check, Check};
use rmab_comm::harness::{aggregate_dir, parse_seeds, run_experiment, RunConfig, Strategy};
use rmab_comm::{Error, Result};

#[derive(Parser)]
#[command(name = "rmab-comm", version, about = "Noisy-arm RMAB learning with Q-parameter communication")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Md,
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckArg {
    Prop1,
    Prop2,
    Chain,
    Vbound,
}

#[derive(Subcommand)]
enum Command {
    /// Train one strategy on one seed and write its metrics CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the strategy in the config.
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Every (strategy, seed) pair, in parallel.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// `0..19` (inclusive), `0..=19` or `1,4,9`.
        #[arg(long)]
        seeds: String,
        /// `all` or a comma-separated list.
        #[arg(long, default_value = "all")]
        strategies: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// IQM and standard error per strategy and epoch.
    Aggregate {
        dir: PathBuf,
        #[arg(long, value_enum, default_value = "md")]
        format: Format,
        /// Epoch used as the zero point of the normalized score.
        #[arg(long, default_value_t = 200)]
        comm_start_epoch: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Numerical checks of the analysis results.
    Analyze {
        #[arg(long, value_enum)]
        check: CheckArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn thread_cap() -> Result<Option<usize>> {
    match std::env::var("RMAB_COMM_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!("RMAB_COMM_THREADS must be a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(None),
    }
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run {
            config,
            seed,
            strategy,
            out,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = strategy {
                cfg.strategy = s.parse()?;
            }
            let seed = seed.unwrap_or(cfg.seed);
            let path = run_experiment(&cfg, seed, &out)?;
            println!("{}", path.display());
        }
        Command::Sweep {
            config,
            seeds,
            strategies,
            out,
        } => {
            let cfg = RunConfig::load(&config)?;
            let seeds = parse_seeds(&seeds)?;
            let strategies = Strategy::parse_list(&strategies)?;
            let jobs: Vec<(Strategy, u64)> = strategies.iter().flat_map(|&s| seeds.iter().map(move |&k| (s, k))).collect();
            let mut pool = rayon::ThreadPoolBuilder::new();
            if let Some(n) = thread_cap()? {
                pool = pool.num_threads(n);
            }
            let pool = pool.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            let results: Vec<Result<PathBuf>> = pool.install(|| {
                jobs.par_iter()
                    .map(|&(s, k)| {
                        let mut c = cfg.clone();
                        c.strategy = s;
                        run_experiment(&c, k, &out)
                    })
                    .collect()
            });
            for r in results {
                println!("{}", r?.display());
            }
        }
        Command::Aggregate {
            dir,
            format,
            comm_start_epoch,
            out,
        } => {
            let summary = aggregate_dir(&dir, comm_start_epoch)?;
            let text = match format {
                Format::Csv => format!("{}\n{}", summary.to_csv(), summary.final_csv()),
                Format::Md => summary.to_markdown(),
            };
            match out {
                Some(p) => fs::write(p, text)?,
                None => print!("{text}"),
            }
        }
        Command::Analyze { check, seed, out } => {
            let check = match check {
                CheckArg::Prop1 => Check::Prop1,
                CheckArg::Prop2 => Check::Prop2,
                CheckArg::Chain => Check::Chain,
                CheckArg::Vbound => Check::Vbound,
            };
            let report = run_check(check, seed)?;
            if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(&out, serde_json::to_string_pretty(&report)?)?;
            println!("{:?}: {}", report.check, if report.passed { "pass" } else { "FAIL" });
            return Ok(report.passed);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("rmab-comm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
