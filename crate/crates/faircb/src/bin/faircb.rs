//! Command-line front end: experiment runs from a TOML config, plus solver
//! debugging subcommands.
//!
//! Exit codes: 0 success, 1 config error, 2 runtime or solver error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use faircb::experiment::{fmt_sig, run_experiment, ExperimentConfig, RunOptions};
use faircb::policy::{ConstraintSpec, ContextDistribution};
use faircb::solver::{brute_force_step, solve_ftrl_step, CumulativeLoss, SolverConfig};
use faircb::Error;

#[derive(Parser)]
#[command(
    name = "faircb",
    about = "Fairness-constrained contextual bandit simulations and solver tools"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment config and write summary/aggregate CSVs.
    Run {
        /// Path to the TOML experiment config.
        #[arg(long)]
        config: PathBuf,
        /// Output directory for CSV files.
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Override the config's base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's replication count.
        #[arg(long)]
        reps: Option<usize>,
        /// Worker threads (default: one per core). Results are identical
        /// for any thread count.
        #[arg(long)]
        threads: Option<usize>,
        /// Also write the per-step trace CSV (large).
        #[arg(long)]
        trace: bool,
    },
    /// Solve one constrained step from a cumulative-loss matrix file.
    Solve {
        /// Matrix file: one row per context, comma- or space-separated arms.
        #[arg(long)]
        g_file: PathBuf,
        /// Context distribution, e.g. "0.5,0.5".
        #[arg(long)]
        q: String,
        /// Fairness level in [0, 1/K).
        #[arg(long)]
        v: f64,
        /// Learning rate.
        #[arg(long, default_value_t = 1.0)]
        eta: f64,
    },
    /// Cross-check a solve against the grid-search oracle.
    Oracle {
        #[arg(long)]
        g_file: PathBuf,
        #[arg(long)]
        q: String,
        #[arg(long)]
        v: f64,
        #[arg(long, default_value_t = 1.0)]
        eta: f64,
        /// Grid resolution.
        #[arg(long, default_value_t = 1e-3)]
        resolution: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Run {
            config,
            out,
            seed,
            reps,
            threads,
            trace,
        } => {
            let cfg = match ExperimentConfig::from_path(&config).and_then(|c| {
                c.validate()?;
                Ok(c)
            }) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(1);
                }
            };
            let opts = RunOptions {
                out_dir: Some(out),
                seed,
                replications: reps,
                threads,
                write_trace: trace,
            };
            match run_experiment(&cfg, &opts) {
                Ok(output) => {
                    for agg in &output.aggregates {
                        println!(
                            "v = {:<6} performance = {} ± {}  regret = {} ± {}  vio = {}",
                            fmt_sig(agg.v),
                            fmt_sig(agg.mean_performance),
                            fmt_sig(agg.se_performance),
                            fmt_sig(agg.mean_regret),
                            fmt_sig(agg.se_regret),
                            fmt_sig(agg.mean_vio),
                        );
                    }
                    if let Some(p) = &output.summary_path {
                        println!("summary: {}", p.display());
                    }
                    if let Some(p) = &output.aggregate_path {
                        println!("aggregate: {}", p.display());
                    }
                    if let Some(p) = &output.trace_path {
                        println!("trace: {}", p.display());
                    }
                    if output.failures.is_empty() {
                        ExitCode::SUCCESS
                    } else {
                        for (v, rep, msg) in &output.failures {
                            eprintln!("replication failed: v = {v}, rep = {rep}: {msg}");
                        }
                        ExitCode::from(2)
                    }
                }
                Err(e @ Error::Config(_)) => {
                    eprintln!("config error: {e}");
                    ExitCode::from(1)
                }
                Err(e) => {
                    eprintln!("run error: {e}");
                    ExitCode::from(2)
                }
            }
        }
        Cmd::Solve { g_file, q, v, eta } => match solve_cmd(&g_file, &q, v, eta) {
            Ok(code) => code,
            Err(e) => {
                eprintln!("solve error: {e}");
                ExitCode::from(2)
            }
        },
        Cmd::Oracle {
            g_file,
            q,
            v,
            eta,
            resolution,
        } => match oracle_cmd(&g_file, &q, v, eta, resolution) {
            Ok(code) => code,
            Err(e) => {
                eprintln!("oracle error: {e}");
                ExitCode::from(2)
            }
        },
    }
}

fn parse_inputs(
    g_file: &PathBuf,
    q: &str,
    v: f64,
) -> Result<(CumulativeLoss, ConstraintSpec), Error> {
    let text = std::fs::read_to_string(g_file)?;
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|e| Error::Config(format!("g-file entry {t:?}: {e}")))
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let g = CumulativeLoss::from_rows(&rows)?;
    let qv: Vec<f64> = q
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("q entry {t:?}: {e}")))
        })
        .collect::<Result<_, _>>()?;
    let q = ContextDistribution::new(qv)?;
    let c = ConstraintSpec::new(q, g.num_arms(), v)?;
    Ok((g, c))
}

fn print_policy(p: &faircb::Policy) {
    for j in 0..p.num_contexts() {
        let row: Vec<String> = p.row(j).iter().map(|&x| fmt_sig(x)).collect();
        println!("p[{j}] = [{}]", row.join(", "));
    }
}

fn solve_cmd(g_file: &PathBuf, q: &str, v: f64, eta: f64) -> Result<ExitCode, Error> {
    let (g, c) = parse_inputs(g_file, q, v)?;
    let cfg = SolverConfig::new(eta)?;
    match solve_ftrl_step(&g, &c, &cfg) {
        Ok((p, dual)) => {
            print_policy(&p);
            let marg = p.marginals(c.q())?;
            println!(
                "marginals = [{}]",
                marg.iter().map(|&x| fmt_sig(x)).collect::<Vec<_>>().join(", ")
            );
            println!(
                "lambda = [{}]",
                dual.lambda
                    .iter()
                    .map(|&x| fmt_sig(x))
                    .collect::<Vec<_>>()
                    .join(", ")
            );
            println!("gap = {}", fmt_sig(dual.gap));
            println!("iterations = {}", dual.iterations);
            Ok(ExitCode::SUCCESS)
        }
        Err(e) => {
            eprintln!("solve failed: {e}");
            Ok(ExitCode::from(2))
        }
    }
}

fn oracle_cmd(
    g_file: &PathBuf,
    q: &str,
    v: f64,
    eta: f64,
    resolution: f64,
) -> Result<ExitCode, Error> {
    let (g, c) = parse_inputs(g_file, q, v)?;
    let cfg = SolverConfig::new(eta)?;
    let p = brute_force_step(&g, &c, &cfg, resolution)?;
    print_policy(&p);
    let marg = p.marginals(c.q())?;
    println!(
        "marginals = [{}]",
        marg.iter().map(|&x| fmt_sig(x)).collect::<Vec<_>>().join(", ")
    );
    Ok(ExitCode::SUCCESS)
}
