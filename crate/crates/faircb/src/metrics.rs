//! Performance, pseudo-regret, fairness violation, disparity, and summary
//! statistics over simulation traces.
//!
//! Regret is computed from the recorded policy snapshots rather than the
//! realized arms: the comparator is the best fixed feasible policy on the
//! trace's true loss vectors, and the expected-policy form removes the
//! sampling noise of the arm draws.

use crate::error::{Error, Result};
use crate::policy::{ConstraintSpec, ContextDistribution, Trace};
use crate::solver::best_fixed_policy;

/// One replication's scalar results, matching the summary CSV schema.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub name: String,
    pub algorithm: String,
    pub v: f64,
    pub rep: u32,
    pub performance: f64,
    pub regret: f64,
    pub vio: f64,
    pub disparity: Option<f64>,
    pub seed: u64,
}

/// One minus the average realized loss.
pub fn performance(trace: &Trace) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let total: f64 = trace.rounds().iter().map(|r| r.realized).sum();
    Ok(1.0 - total / trace.len() as f64)
}

/// Pseudo-regret against the best fixed feasible policy in hindsight:
/// `Σ_t ⟨p_t^{j_t} − p*^{j_t}, l_t⟩`.
pub fn regret(trace: &Trace, c: &ConstraintSpec) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let best = best_fixed_policy(
        trace.rounds().iter().map(|r| (r.context, &r.losses)),
        c,
    )?;
    let mut total = 0.0;
    for r in trace.rounds() {
        let pt = r.policy.row(r.context);
        let ps = best.row(r.context);
        for i in 0..trace.num_arms() {
            total += (pt[i] - ps[i]) * r.losses.get(i);
        }
    }
    Ok(total)
}

/// Time-averaged positive part of the fairness shortfall under the true
/// context distribution: `(1/T) Σ_t max(0, v − min_i Σ_j q(j) p_t^j(i))`.
pub fn violation_avg(trace: &Trace, q_true: &ContextDistribution, v: f64) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let mut total = 0.0;
    for r in trace.rounds() {
        let min_marg = r.policy.min_marginal(q_true)?;
        total += (v - min_marg).max(0.0);
    }
    Ok(total / trace.len() as f64)
}

/// Absolute difference, across the two contexts, of the between-arm gaps of
/// the empirical per-cell loss means:
/// `|(μ̂_{1,1} − μ̂_{2,1}) − (μ̂_{1,2} − μ̂_{2,2})|`. Defined for the
/// two-arm, two-context case; every context must have been observed.
pub fn disparity(trace: &Trace) -> Result<f64> {
    if trace.num_arms() != 2 || trace.num_contexts() != 2 {
        return Err(Error::InvalidParameter(
            "disparity is defined for 2 arms and 2 contexts".into(),
        ));
    }
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let mut sums = [[0.0f64; 2]; 2]; // [arm][context]
    let mut counts = [0usize; 2];
    for r in trace.rounds() {
        counts[r.context] += 1;
        for i in 0..2 {
            sums[i][r.context] += r.losses.get(i);
        }
    }
    for (j, &n) in counts.iter().enumerate() {
        if n == 0 {
            return Err(Error::EmptyCell { arm: 0, context: j });
        }
    }
    let mu = |i: usize, j: usize| sums[i][j] / counts[j] as f64;
    Ok(((mu(0, 0) - mu(1, 0)) - (mu(0, 1) - mu(1, 1))).abs())
}

/// Ordinary least squares of y on x; returns (intercept, slope).
pub fn linear_fit(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(Error::InvalidParameter(
            "need at least two points to fit a line".into(),
        ));
    }
    let n = points.len() as f64;
    let mean_x: f64 = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y: f64 = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::InvalidParameter(
            "degenerate design: all x values coincide".into(),
        ));
    }
    let sxy: f64 = points
        .iter()
        .map(|p| (p.0 - mean_x) * (p.1 - mean_y))
        .sum();
    let slope = sxy / sxx;
    Ok((mean_y - slope * mean_x, slope))
}

/// Mean and standard error (`sample stddev / sqrt(n)`) over replications.
pub fn summarize(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::InvalidParameter(
            "need at least two replications to summarize".into(),
        ));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, var.sqrt() / n.sqrt()))
}
