//! One constrained solve, its dual certificate, and a cross-check against
//! the grid-search oracle.
//!
//! ```bash
//! cargo run --release -p faircb --example solver_demo
//! ```

use faircb::policy::{ConstraintSpec, ContextDistribution};
use faircb::solver::{brute_force_step, solve_ftrl_step, CumulativeLoss, SolverConfig};

fn main() -> faircb::Result<()> {
    // Two contexts, two arms. Arm 1 has piled up losses in both contexts,
    // so without the constraint the solve would all but abandon it.
    let g = CumulativeLoss::from_rows(&[vec![1.0, 6.0], vec![2.0, 5.0]])?;
    let q = ContextDistribution::new(vec![0.7, 0.3])?;
    let c = ConstraintSpec::new(q.clone(), 2, 0.35)?;
    let cfg = SolverConfig::new(1.0)?;

    let (policy, dual) = solve_ftrl_step(&g, &c, &cfg)?;
    println!("constrained solve (v = {}):", c.v());
    for j in 0..policy.num_contexts() {
        println!("  p[{j}] = {:?}", policy.row(j));
    }
    println!("  marginals = {:?}", policy.marginals(&q)?);
    println!("  lambda    = {:?}", dual.lambda);
    println!(
        "  gap = {:.2e}, complementary slackness = {:.2e}, iterations = {}",
        dual.gap, dual.comp_slack, dual.iterations
    );

    let oracle = brute_force_step(&g, &c, &cfg, 1e-3)?;
    let dev = policy
        .as_slice()
        .iter()
        .zip(oracle.as_slice())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    println!("grid oracle agrees within {dev:.2e} (sup norm)");

    // With the constraint dropped the same estimates give a plain softmax.
    let free = ConstraintSpec::new(q, 2, 0.0)?;
    let (softmax, _) = solve_ftrl_step(&g, &free, &cfg)?;
    println!("unconstrained softmax for comparison:");
    for j in 0..softmax.num_contexts() {
        println!("  p[{j}] = {:?}", softmax.row(j));
    }
    Ok(())
}
