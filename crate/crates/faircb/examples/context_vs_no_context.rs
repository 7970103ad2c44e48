//! Whether conditioning on the context matters: the constrained contextual
//! learner against the same learner with the context ignored.
//!
//! The contextual version can place the forced fairness mass in whichever
//! context hurts least, and it wins outright when each arm is strong in a
//! different context.
//!
//! ```bash
//! cargo run --release -p faircb --example context_vs_no_context
//! ```

use faircb::experiment::{
    AlgorithmSpec, BernoulliSpec, EnvironmentSpec, ExperimentConfig, RunOptions,
};

fn run(name: &str, algorithm: AlgorithmSpec, mu: Vec<Vec<f64>>) -> faircb::Result<Vec<(f64, f64)>> {
    let cfg = ExperimentConfig {
        name: name.into(),
        horizon: 2000,
        fairness_grid: vec![0.0, 0.15, 0.3, 0.45],
        eta: Default::default(),
        replications: 50,
        base_seed: 99,
        algorithm,
        environment: EnvironmentSpec::Bernoulli(BernoulliSpec {
            mu,
            q: vec![0.5, 0.5],
        }),
    };
    let out = faircb::run_experiment(&cfg, &RunOptions::default())?;
    Ok(out
        .aggregates
        .iter()
        .map(|a| (a.v, a.mean_performance))
        .collect())
}

fn compare(label: &str, mu: Vec<Vec<f64>>) -> faircb::Result<()> {
    let ctx = run("contextual", AlgorithmSpec::FairCb, mu.clone())?;
    let flat = run("flat", AlgorithmSpec::NoncontextualFtrl, mu)?;
    println!("{label}:");
    println!("     v   contextual   context-blind");
    for ((v, a), (_, b)) in ctx.iter().zip(&flat) {
        println!("  {v:>4}   {a:.4}       {b:.4}");
    }
    Ok(())
}

fn main() -> faircb::Result<()> {
    compare(
        "arm 0 better in both contexts, gap differs per context",
        vec![vec![0.2, 0.4], vec![0.8, 0.6]],
    )?;
    compare(
        "each arm better in one context",
        vec![vec![0.2, 0.8], vec![0.8, 0.2]],
    )?;
    Ok(())
}
