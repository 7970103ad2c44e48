//! Deterministic window scheduling: instead of sampling an arm per round,
//! a window of tasks per context is split among arms by largest-remainder
//! rounding of the current policy. Useful when draws per round are too few
//! for sampling noise to average out, e.g. quiz questions handed to two
//! participants.
//!
//! ```bash
//! cargo run --release -p faircb --example window_schedule
//! ```

use faircb::experiment::allocate_window;
use faircb::learner::FtrlState;
use faircb::policy::{ConstraintSpec, ContextDistribution};
use faircb::solver::SolverConfig;

fn main() -> faircb::Result<()> {
    let q = ContextDistribution::new(vec![0.5, 0.5])?;
    let c = ConstraintSpec::new(q, 2, 0.33)?;
    let mut learner = FtrlState::new(c, SolverConfig::new(0.25)?)?;

    // four windows of 10 tasks, 5 per context; batch updates between them
    let window = [5usize, 5];
    // observed per-(arm, context) loss rates fed back after each window
    let loss_rate = [[0.2f64, 0.9], [0.8, 0.3]]; // [arm][context]

    for w in 0..4 {
        let policy = learner.policy()?;
        let counts = allocate_window(&policy, &window)?;
        println!("window {w}: policy rows {:?} {:?}", policy.row(0), policy.row(1));
        for (j, arm_counts) in counts.iter().enumerate() {
            println!("  context {j}: tasks per arm {arm_counts:?}");
        }
        // batch feedback: one act/observe per scheduled task
        for (j, arm_counts) in counts.iter().enumerate() {
            for (arm, &n) in arm_counts.iter().enumerate() {
                for _ in 0..n {
                    // deterministic schedules bypass sampling: feed the
                    // realized loss through the estimator at the scheduled
                    // arm's current probability
                    let mut rng = faircb::replication_rng(0, w as u32, (j * 2 + arm) as u32);
                    let sampled = learner.act(j, &mut rng)?;
                    let loss = loss_rate[sampled][j];
                    learner.observe(j, sampled, loss)?;
                }
            }
        }
    }
    let final_policy = learner.policy()?;
    println!(
        "final allocation for a 5-task window per context: {:?}",
        allocate_window(&final_policy, &window)?
    );
    Ok(())
}
