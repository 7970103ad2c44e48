//! Performance as a function of the fairness level, with an OLS fit.
//!
//! When one arm dominates in every context, raising the minimum pull rate
//! forces mass onto the weak arm and performance decays roughly linearly;
//! when each arm wins somewhere, the constraint is satisfied for free.
//!
//! ```bash
//! cargo run --release -p faircb --example fairness_performance_sweep
//! ```

use faircb::experiment::{
    AlgorithmSpec, BernoulliSpec, EnvironmentSpec, ExperimentConfig, RunOptions,
};
use faircb::metrics::linear_fit;

fn sweep(name: &str, mu: Vec<Vec<f64>>) -> faircb::Result<Vec<(f64, f64)>> {
    let cfg = ExperimentConfig {
        name: name.into(),
        horizon: 2000,
        fairness_grid: vec![0.0, 0.09, 0.18, 0.27, 0.36, 0.45],
        eta: Default::default(),
        replications: 50,
        base_seed: 42,
        algorithm: AlgorithmSpec::FairCb,
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

fn main() -> faircb::Result<()> {
    // arm 0 better in both contexts: fairness costs performance
    let pts = sweep("dominant_arm", vec![vec![0.6, 0.6], vec![0.8, 0.8]])?;
    println!("one arm dominant:");
    for (v, p) in &pts {
        println!("  v = {v:<5} mean performance = {p:.4}");
    }
    let (b, a) = linear_fit(&pts)?;
    println!("  OLS: performance = {b:.3} + ({a:.3}) v");

    // each arm better in one context: fairness is free
    let pts = sweep("split_arms", vec![vec![0.2, 1.0], vec![1.0, 0.6]])?;
    println!("each arm wins one context:");
    for (v, p) in &pts {
        println!("  v = {v:<5} mean performance = {p:.4}");
    }
    let (b, a) = linear_fit(&pts)?;
    println!("  OLS: performance = {b:.3} + ({a:.3}) v (slope near zero)");
    Ok(())
}
