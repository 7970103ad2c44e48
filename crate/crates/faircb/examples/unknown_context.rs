//! The doubling-epoch learner when the context distribution is unknown:
//! epoch schedule, estimates, slacks, and the violation budget, in both
//! relaxed and conservative modes.
//!
//! ```bash
//! cargo run --release -p faircb --example unknown_context
//! ```

use faircb::env::{BernoulliEnv, Environment};
use faircb::epoch::{epoch_of, epsilon_k, EpochMode, EpochState};
use faircb::metrics::{performance, violation_avg};
use faircb::policy::ContextDistribution;
use faircb::runner::{replication_rng, run_rounds};

fn main() -> faircb::Result<()> {
    let horizon = 4096;
    let v = 0.3;
    let q = ContextDistribution::new(vec![0.5, 0.5])?;
    let mu = vec![vec![0.6, 0.6], vec![0.8, 0.8]];

    for mode in [EpochMode::Relaxed, EpochMode::Conservative] {
        let mut env = Environment::Bernoulli(BernoulliEnv::new(mu.clone(), q.clone())?);
        let mut agent = EpochState::new(2, 2, v, horizon, mode)?;
        let mut rng = replication_rng(11, 0, 0);
        let trace = run_rounds(&mut agent, &mut env, horizon, &mut rng)?;

        println!("mode {mode:?}:");
        println!("  epoch  tau    eps      v_eff    fallback  |q_hat - q|_1");
        for rec in agent.history() {
            let dev = rec
                .q_hat
                .as_ref()
                .map(|qh| format!("{:.4}", qh.l1_distance(&q).unwrap()))
                .unwrap_or_else(|| "-".into());
            println!(
                "  {:>5}  {:>4}  {:>7}  {:>7}  {:>8}  {dev}",
                rec.k,
                rec.tau,
                rec.eps.map(|e| format!("{e:.3}")).unwrap_or_else(|| "-".into()),
                rec.v_eff.map(|e| format!("{e:.3}")).unwrap_or_else(|| "-".into()),
                rec.fallback_uniform,
            );
        }

        // the violation budget from the epoch slacks
        let last_epoch = epoch_of(horizon)?;
        let budget: f64 = (2..=last_epoch)
            .map(|k| {
                let tau = 1usize << (k - 1);
                tau as f64 * epsilon_k(tau, 2, horizon).unwrap()
            })
            .sum::<f64>()
            / horizon as f64;
        println!("  performance = {:.4}", performance(&trace)?);
        println!(
            "  measured violation = {:.4} (budget {:.4})",
            violation_avg(&trace, &q, v)?,
            budget
        );
    }
    Ok(())
}
