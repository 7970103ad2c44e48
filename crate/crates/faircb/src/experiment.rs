//! Experiment harness: declarative TOML configs, seeded replications run in
//! parallel, CSV outputs, and the deterministic window scheduler.
//!
//! Replications are the unit of parallelism. Every replication's rng stream
//! is derived from `(base seed, grid index, replication index)` only, so
//! summary files are byte-identical across runs and across worker counts,
//! and reducing the replication count leaves a prefix of the rows.
//!
//! Config schema (TOML):
//!
//! ```toml
//! name = "fairness_sweep"
//! horizon = 2000
//! fairness_grid = [0.0, 0.09, 0.18, 0.27, 0.36, 0.45]
//! eta = "default"            # or an explicit number, e.g. 0.25
//! replications = 100
//! base_seed = 42
//!
//! [algorithm]
//! type = "fair_cb"           # fair_cb | epoch_fair_cb | exp3_per_context |
//!                            # noncontextual_ftrl | fair_ucb
//! # mode = "relaxed"         # epoch_fair_cb only: relaxed | conservative
//!
//! [environment]
//! type = "bernoulli"         # bernoulli | switching_adversary
//! mu = [[0.6, 0.6], [0.8, 0.8]]   # K rows of M per-context loss means
//! q = [0.5, 0.5]
//! # switching_adversary instead takes loss_means_a / loss_means_b
//! # (defaults [0.1, 0.9] and [0.9, 0.1])
//! ```
//!
//! Unknown keys are errors.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

use crate::baselines::{Exp3PerContext, NoncontextualFtrl, UcbState};
use crate::env::{BernoulliEnv, Environment, SwitchingAdversary};
use crate::epoch::{EpochMode, EpochState};
use crate::error::{Error, Result};
use crate::learner::{default_eta, FtrlState};
use crate::metrics::{disparity, performance, regret, summarize, violation_avg, RunSummary};
use crate::policy::{ConstraintSpec, ContextDistribution, Policy, Trace};
use crate::runner::{replication_rng, run_rounds, Bandit};
use crate::solver::SolverConfig;

// ── Config ──────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub horizon: usize,
    pub fairness_grid: Vec<f64>,
    #[serde(default)]
    pub eta: EtaSpec,
    pub replications: usize,
    #[serde(default)]
    pub base_seed: u64,
    pub algorithm: AlgorithmSpec,
    pub environment: EnvironmentSpec,
}

/// Learning rate: the literal string `"default"` for the horizon-tuned rate
/// `sqrt(M ln K / (T K))`, or an explicit positive number.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum EtaSpec {
    Value(f64),
    Named(String),
}

impl Default for EtaSpec {
    fn default() -> Self {
        EtaSpec::Named("default".into())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AlgorithmSpec {
    FairCb,
    EpochFairCb(EpochAlgSpec),
    Exp3PerContext,
    NoncontextualFtrl,
    FairUcb,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpochAlgSpec {
    pub mode: EpochMode,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EnvironmentSpec {
    Bernoulli(BernoulliSpec),
    SwitchingAdversary(SwitchingSpec),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BernoulliSpec {
    /// K rows of M per-context Bernoulli loss means.
    pub mu: Vec<Vec<f64>>,
    pub q: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchingSpec {
    #[serde(default = "default_means_a")]
    pub loss_means_a: Vec<f64>,
    #[serde(default = "default_means_b")]
    pub loss_means_b: Vec<f64>,
}

fn default_means_a() -> Vec<f64> {
    vec![0.1, 0.9]
}

fn default_means_b() -> Vec<f64> {
    vec![0.9, 0.1]
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn num_contexts(&self) -> usize {
        match &self.environment {
            EnvironmentSpec::Bernoulli(b) => b.q.len(),
            EnvironmentSpec::SwitchingAdversary(_) => 1,
        }
    }

    pub fn num_arms(&self) -> usize {
        match &self.environment {
            EnvironmentSpec::Bernoulli(b) => b.mu.len(),
            EnvironmentSpec::SwitchingAdversary(s) => s.loss_means_a.len(),
        }
    }

    pub fn algorithm_label(&self) -> String {
        match &self.algorithm {
            AlgorithmSpec::FairCb => "fair_cb".into(),
            AlgorithmSpec::EpochFairCb(e) => match e.mode {
                EpochMode::Relaxed => "epoch_fair_cb(relaxed)".into(),
                EpochMode::Conservative => "epoch_fair_cb(conservative)".into(),
            },
            AlgorithmSpec::Exp3PerContext => "exp3_per_context".into(),
            AlgorithmSpec::NoncontextualFtrl => "noncontextual_ftrl".into(),
            AlgorithmSpec::FairUcb => "fair_ucb".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Config("name: must not be empty".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon: must be at least 1".into()));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications: must be at least 1".into()));
        }
        if self.fairness_grid.is_empty() {
            return Err(Error::Config(
                "fairness_grid: must contain at least one level".into(),
            ));
        }
        let k = self.num_arms();
        if k == 0 {
            return Err(Error::Config("environment: needs at least one arm".into()));
        }
        let cap = 1.0 / k as f64;
        for &v in &self.fairness_grid {
            if !(0.0..cap).contains(&v) {
                return Err(Error::Config(format!(
                    "fairness_grid: level {v} outside [0, 1/K) with K = {k}"
                )));
            }
        }
        match &self.eta {
            EtaSpec::Named(s) if s == "default" => {}
            EtaSpec::Named(s) => {
                return Err(Error::Config(format!(
                    "eta: unknown name {s:?}, expected \"default\" or a number"
                )))
            }
            EtaSpec::Value(x) if *x > 0.0 && x.is_finite() => {}
            EtaSpec::Value(x) => {
                return Err(Error::Config(format!("eta: {x} must be positive")))
            }
        }
        match &self.algorithm {
            AlgorithmSpec::EpochFairCb(_) => {
                if matches!(&self.eta, EtaSpec::Value(_)) {
                    return Err(Error::Config(
                        "eta: epoch_fair_cb derives per-epoch rates; use \"default\"".into(),
                    ));
                }
            }
            AlgorithmSpec::FairUcb => {
                if matches!(&self.eta, EtaSpec::Value(_)) {
                    return Err(Error::Config(
                        "eta: fair_ucb does not use a learning rate".into(),
                    ));
                }
            }
            _ => {}
        }
        // environment construction carries the remaining value checks
        self.build_environment()?;
        Ok(())
    }

    pub fn build_environment(&self) -> Result<Environment> {
        match &self.environment {
            EnvironmentSpec::Bernoulli(b) => {
                let q = ContextDistribution::new(b.q.clone())
                    .map_err(|e| Error::Config(format!("environment.q: {e}")))?;
                let env = BernoulliEnv::new(b.mu.clone(), q)
                    .map_err(|e| Error::Config(format!("environment.mu: {e}")))?;
                Ok(Environment::Bernoulli(env))
            }
            EnvironmentSpec::SwitchingAdversary(s) => {
                let adv = SwitchingAdversary::new(s.loss_means_a.clone(), s.loss_means_b.clone())
                    .map_err(|e| Error::Config(format!("environment.loss_means: {e}")))?;
                Ok(Environment::Switching(adv))
            }
        }
    }

    fn resolve_eta(&self, m: usize, k: usize) -> Result<f64> {
        match &self.eta {
            EtaSpec::Value(x) => Ok(*x),
            EtaSpec::Named(_) => default_eta(self.horizon, m, k),
        }
    }

    pub fn build_agent(&self, v: f64) -> Result<Box<dyn Bandit>> {
        let m = self.num_contexts();
        let k = self.num_arms();
        match &self.algorithm {
            AlgorithmSpec::FairCb => {
                let q = self.build_environment()?.context_distribution();
                let c = ConstraintSpec::new(q, k, v)?;
                let cfg = SolverConfig::new(self.resolve_eta(m, k)?)?;
                Ok(Box::new(FtrlState::new(c, cfg)?))
            }
            AlgorithmSpec::EpochFairCb(e) => Ok(Box::new(EpochState::new(
                m,
                k,
                v,
                self.horizon,
                e.mode,
            )?)),
            AlgorithmSpec::Exp3PerContext => Ok(Box::new(Exp3PerContext::new(
                m,
                k,
                self.resolve_eta(m, k)?,
            )?)),
            AlgorithmSpec::NoncontextualFtrl => {
                let cfg = SolverConfig::new(self.resolve_eta(1, k)?)?;
                Ok(Box::new(NoncontextualFtrl::new(m, k, v, cfg)?))
            }
            AlgorithmSpec::FairUcb => Ok(Box::new(UcbState::new(k, v, m)?)),
        }
    }
}

// ── Running ─────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Where to write CSV files; `None` keeps results in memory only.
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub replications: Option<usize>,
    pub threads: Option<usize>,
    pub write_trace: bool,
}

#[derive(Debug, Clone)]
pub struct AggregateRow {
    pub v: f64,
    pub n: usize,
    pub mean_performance: f64,
    pub se_performance: f64,
    pub mean_regret: f64,
    pub se_regret: f64,
    pub mean_vio: f64,
    pub se_vio: f64,
}

#[derive(Debug)]
pub struct ExperimentOutput {
    pub summaries: Vec<RunSummary>,
    pub aggregates: Vec<AggregateRow>,
    /// Replications aborted by solver or protocol errors: (v, rep, message).
    pub failures: Vec<(f64, u32, String)>,
    pub summary_path: Option<PathBuf>,
    pub aggregate_path: Option<PathBuf>,
    pub trace_path: Option<PathBuf>,
}

/// Runs a single replication and returns its summary and full trace. The
/// rng stream depends only on `(base_seed, v_idx, rep)`.
pub fn run_one(cfg: &ExperimentConfig, v_idx: usize, rep: u32) -> Result<(RunSummary, Trace)> {
    let v = *cfg
        .fairness_grid
        .get(v_idx)
        .ok_or_else(|| Error::Config(format!("fairness_grid index {v_idx} out of range")))?;
    let mut env = cfg.build_environment()?;
    let mut agent = cfg.build_agent(v)?;
    let mut rng = replication_rng(cfg.base_seed, v_idx as u32, rep);
    let trace = run_rounds(agent.as_mut(), &mut env, cfg.horizon, &mut rng)?;

    let q_true = env.context_distribution();
    let k = cfg.num_arms();
    let perf = performance(&trace)?;
    let c_true = ConstraintSpec::new(q_true.clone(), k, v)?;
    let reg = regret(&trace, &c_true)?;
    let vio = violation_avg(&trace, &q_true, v)?;
    let disp = if cfg.num_contexts() == 2 && k == 2 {
        disparity(&trace).ok()
    } else {
        None
    };
    let summary = RunSummary {
        name: cfg.name.clone(),
        algorithm: cfg.algorithm_label(),
        v,
        rep,
        performance: perf,
        regret: reg,
        vio,
        disparity: disp,
        seed: ((v_idx as u64) << 32) | rep as u64,
    };
    Ok((summary, trace))
}

struct TraceCsvRow {
    v: f64,
    rep: u32,
    t: usize,
    context: usize,
    arm: usize,
    loss: f64,
    probs: Vec<f64>,
}

/// Runs every (fairness level, replication) job, aggregates per level, and
/// writes CSVs when an output directory is given.
pub fn run_experiment(cfg_in: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentOutput> {
    let mut cfg = cfg_in.clone();
    if let Some(s) = opts.seed {
        cfg.base_seed = s;
    }
    if let Some(r) = opts.replications {
        cfg.replications = r;
    }
    cfg.validate()?;

    let jobs: Vec<(usize, u32)> = (0..cfg.fairness_grid.len())
        .flat_map(|vi| (0..cfg.replications as u32).map(move |r| (vi, r)))
        .collect();

    let capture_trace = opts.write_trace;
    let compute = || {
        jobs.par_iter()
            .map(|&(vi, rep)| {
                let res = run_one(&cfg, vi, rep).map(|(summary, trace)| {
                    let rows = capture_trace.then(|| {
                        trace
                            .rounds()
                            .iter()
                            .map(|r| TraceCsvRow {
                                v: summary.v,
                                rep,
                                t: r.t,
                                context: r.context,
                                arm: r.arm,
                                loss: r.realized,
                                probs: r.policy.as_slice().to_vec(),
                            })
                            .collect::<Vec<_>>()
                    });
                    (summary, rows)
                });
                ((vi, rep), res)
            })
            .collect::<Vec<_>>()
    };
    let results = match opts.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("threads: {e}")))?
            .install(compute),
        None => compute(),
    };

    let mut summaries = Vec::with_capacity(jobs.len());
    let mut failures = Vec::new();
    let mut trace_rows: Vec<TraceCsvRow> = Vec::new();
    for ((vi, rep), res) in results {
        match res {
            Ok((summary, rows)) => {
                summaries.push(summary);
                if let Some(mut rows) = rows {
                    trace_rows.append(&mut rows);
                }
            }
            Err(e) => failures.push((cfg.fairness_grid[vi], rep, e.to_string())),
        }
    }

    let mut aggregates = Vec::new();
    for (vi, &v) in cfg.fairness_grid.iter().enumerate() {
        let rows: Vec<&RunSummary> = summaries
            .iter()
            .filter(|s| s.seed >> 32 == vi as u64)
            .collect();
        if rows.is_empty() {
            continue;
        }
        let stat = |f: &dyn Fn(&RunSummary) -> f64| -> (f64, f64) {
            let vals: Vec<f64> = rows.iter().map(|s| f(s)).collect();
            if vals.len() >= 2 {
                summarize(&vals).expect("n >= 2")
            } else {
                (vals[0], 0.0)
            }
        };
        let (mp, sp) = stat(&|s| s.performance);
        let (mr, sr) = stat(&|s| s.regret);
        let (mv, sv) = stat(&|s| s.vio);
        aggregates.push(AggregateRow {
            v,
            n: rows.len(),
            mean_performance: mp,
            se_performance: sp,
            mean_regret: mr,
            se_regret: sr,
            mean_vio: mv,
            se_vio: sv,
        });
    }

    let (mut summary_path, mut aggregate_path, mut trace_path) = (None, None, None);
    if let Some(dir) = &opts.out_dir {
        std::fs::create_dir_all(dir)?;
        let sp = dir.join(format!("{}.csv", cfg.name));
        write_summary_csv(&sp, &summaries)?;
        summary_path = Some(sp);
        let ap = dir.join(format!("{}_aggregate.csv", cfg.name));
        write_aggregate_csv(&ap, &cfg, &aggregates)?;
        aggregate_path = Some(ap);
        if opts.write_trace {
            let tp = dir.join(format!("{}_trace.csv", cfg.name));
            write_trace_csv(&tp, cfg.num_contexts(), cfg.num_arms(), &trace_rows)?;
            trace_path = Some(tp);
        }
    }

    Ok(ExperimentOutput {
        summaries,
        aggregates,
        failures,
        summary_path,
        aggregate_path,
        trace_path,
    })
}

// ── CSV output ──────────────────────────────────────────────────────────

/// Formats with 12 significant digits, plain decimal point, no trailing
/// zeros; falls back to scientific notation outside a readable range.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.11e}");
    let (_, exp) = sci.split_once('e').expect("{:e} always carries an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if (-4..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let (mantissa, _) = sci.split_once('e').unwrap();
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn write_summary_csv(path: &Path, rows: &[RunSummary]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "name",
        "algorithm",
        "v",
        "rep",
        "performance",
        "regret",
        "vio",
        "disparity",
        "seed",
    ])?;
    for r in rows {
        w.write_record([
            r.name.as_str(),
            r.algorithm.as_str(),
            &fmt_sig(r.v),
            &r.rep.to_string(),
            &fmt_sig(r.performance),
            &fmt_sig(r.regret),
            &fmt_sig(r.vio),
            &r.disparity.map(fmt_sig).unwrap_or_default(),
            &r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_aggregate_csv(
    path: &Path,
    cfg: &ExperimentConfig,
    rows: &[AggregateRow],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "name",
        "algorithm",
        "v",
        "n",
        "mean_performance",
        "se_performance",
        "mean_regret",
        "se_regret",
        "mean_vio",
        "se_vio",
    ])?;
    for r in rows {
        w.write_record([
            cfg.name.as_str(),
            &cfg.algorithm_label(),
            &fmt_sig(r.v),
            &r.n.to_string(),
            &fmt_sig(r.mean_performance),
            &fmt_sig(r.se_performance),
            &fmt_sig(r.mean_regret),
            &fmt_sig(r.se_regret),
            &fmt_sig(r.mean_vio),
            &fmt_sig(r.se_vio),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_trace_csv(path: &Path, m: usize, k: usize, rows: &[TraceCsvRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![
        "v".to_string(),
        "rep".to_string(),
        "t".to_string(),
        "j".to_string(),
        "i".to_string(),
        "loss".to_string(),
    ];
    for j in 0..m {
        for i in 0..k {
            header.push(format!("p{j}_{i}"));
        }
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            fmt_sig(r.v),
            r.rep.to_string(),
            r.t.to_string(),
            r.context.to_string(),
            r.arm.to_string(),
            fmt_sig(r.loss),
        ];
        rec.extend(r.probs.iter().map(|&p| fmt_sig(p)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

// ── Window scheduler ────────────────────────────────────────────────────

/// Deterministic allocation of a window of tasks per context: largest
/// remainder rounding of `window_counts[j] · p^j`, ties to the lowest arm
/// index, so each context's counts sum exactly to its window size.
pub fn allocate_window(p: &Policy, window_counts: &[usize]) -> Result<Vec<Vec<usize>>> {
    if window_counts.len() != p.num_contexts() {
        return Err(Error::DimensionMismatch(format!(
            "window has {} context entries, policy has {}",
            window_counts.len(),
            p.num_contexts()
        )));
    }
    let k = p.num_arms();
    let mut out = Vec::with_capacity(window_counts.len());
    for (j, &n) in window_counts.iter().enumerate() {
        let quotas: Vec<f64> = (0..k).map(|i| n as f64 * p.get(j, i)).collect();
        let mut counts: Vec<usize> = quotas.iter().map(|&q| q.floor() as usize).collect();
        let assigned: usize = counts.iter().sum();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| {
            let fa = quotas[a] - quotas[a].floor();
            let fb = quotas[b] - quotas[b].floor();
            fb.total_cmp(&fa).then(a.cmp(&b))
        });
        for &i in order.iter().take(n.saturating_sub(assigned)) {
            counts[i] += 1;
        }
        out.push(counts);
    }
    Ok(out)
}
