//! A full known-distribution run: Bernoulli losses, per-round fairness, and
//! the summary metrics.
//!
//! ```bash
//! cargo run --release -p faircb --example known_context
//! ```

use faircb::env::{BernoulliEnv, Environment};
use faircb::learner::{default_eta, FtrlState};
use faircb::metrics::{performance, regret, violation_avg};
use faircb::policy::{ConstraintSpec, ContextDistribution};
use faircb::runner::{replication_rng, run_rounds};
use faircb::solver::SolverConfig;

fn main() -> faircb::Result<()> {
    let horizon = 2000;
    let v = 0.3;
    let q = ContextDistribution::new(vec![0.5, 0.5])?;
    // arm 0 is better in both contexts, so the constraint forces mass onto
    // arm 1 and costs performance
    let mu = vec![vec![0.6, 0.6], vec![0.8, 0.8]];
    let mut env = Environment::Bernoulli(BernoulliEnv::new(mu, q.clone())?);

    let c = ConstraintSpec::new(q.clone(), 2, v)?;
    let eta = default_eta(horizon, 2, 2)?;
    let mut agent = FtrlState::new(c.clone(), SolverConfig::new(eta)?)?;
    let mut rng = replication_rng(7, 0, 0);

    let trace = run_rounds(&mut agent, &mut env, horizon, &mut rng)?;

    let worst_marginal = trace
        .rounds()
        .iter()
        .map(|r| r.policy.min_marginal(&q).unwrap())
        .fold(f64::INFINITY, f64::min);
    println!("horizon {horizon}, v = {v}, eta = {eta:.5}");
    println!("performance       = {:.4}", performance(&trace)?);
    println!("pseudo-regret     = {:.2}", regret(&trace, &c)?);
    println!("avg violation     = {:.3e}", violation_avg(&trace, &q, v)?);
    println!("worst marginal    = {worst_marginal:.6} (never below v)");

    // final policy rows after the last update
    let p = agent.policy()?;
    for j in 0..p.num_contexts() {
        println!("final p[{j}]       = {:?}", p.row(j));
    }
    Ok(())
}
