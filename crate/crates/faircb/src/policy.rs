//! Core domain types: policies over contexts, context distributions,
//! fairness constraints, loss vectors, and simulation traces.
//!
//! A policy is a collection of M probability distributions over K arms, one
//! per context. The fairness constraint requires the q-weighted marginal
//! probability of pulling each arm, `Σ_j q(j) p^j(i)`, to stay at or above a
//! level `v` every round. The feasible set is a product of simplices cut by
//! K linear inequalities; it is convex and contains the uniform policy
//! whenever `v ≤ 1/K`.
//!
//! All types here are plain immutable values: safe to clone, send, and share.

use crate::error::{Error, Result};

/// Default tolerance for simplex and feasibility checks.
pub const SIMPLEX_TOL: f64 = 1e-9;

// ── Policy ──────────────────────────────────────────────────────────────

/// M per-context probability distributions over K arms, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    m: usize,
    k: usize,
    probs: Vec<f64>,
}

impl Policy {
    /// Builds a policy and checks the distribution invariants: every entry
    /// in `[0, 1]` and every row summing to 1 within [`SIMPLEX_TOL`].
    pub fn new(m: usize, k: usize, probs: Vec<f64>) -> Result<Self> {
        if m == 0 || k == 0 {
            return Err(Error::InvalidParameter(
                "policy dimensions must be positive".into(),
            ));
        }
        if probs.len() != m * k {
            return Err(Error::DimensionMismatch(format!(
                "policy storage has {} entries, expected {}x{}",
                probs.len(),
                m,
                k
            )));
        }
        for (idx, &p) in probs.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidDistribution(format!(
                    "policy entry ({}, {}) = {p} outside [0, 1]",
                    idx / k,
                    idx % k
                )));
            }
        }
        for j in 0..m {
            let sum: f64 = probs[j * k..(j + 1) * k].iter().sum();
            if (sum - 1.0).abs() > SIMPLEX_TOL {
                return Err(Error::InvalidDistribution(format!(
                    "policy row {j} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(Self { m, k, probs })
    }

    /// Builds a policy without value checks; dimensions must still agree.
    ///
    /// Intended for feeding raw matrices into [`validate_policy`], which
    /// reports violations instead of rejecting them.
    pub fn from_raw(m: usize, k: usize, probs: Vec<f64>) -> Result<Self> {
        if m == 0 || k == 0 || probs.len() != m * k {
            return Err(Error::DimensionMismatch(format!(
                "policy storage has {} entries, expected {}x{}",
                probs.len(),
                m,
                k
            )));
        }
        Ok(Self { m, k, probs })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        let k = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::DimensionMismatch(
                "policy rows have unequal lengths".into(),
            ));
        }
        Self::new(m, k, rows.concat())
    }

    /// The uniform policy: every entry `1/k`. Always feasible for `v ≤ 1/k`.
    pub fn uniform(m: usize, k: usize) -> Result<Self> {
        if m == 0 || k == 0 {
            return Err(Error::InvalidParameter(
                "policy dimensions must be positive".into(),
            ));
        }
        Ok(Self {
            m,
            k,
            probs: vec![1.0 / k as f64; m * k],
        })
    }

    pub fn num_contexts(&self) -> usize {
        self.m
    }

    pub fn num_arms(&self) -> usize {
        self.k
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.probs[j * self.k..(j + 1) * self.k]
    }

    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.probs[j * self.k + i]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// Per-arm marginal pull probabilities `Σ_j q(j) p^j(i)`.
    pub fn marginals(&self, q: &ContextDistribution) -> Result<Vec<f64>> {
        if q.len() != self.m {
            return Err(Error::DimensionMismatch(format!(
                "context distribution has {} entries, policy has {} contexts",
                q.len(),
                self.m
            )));
        }
        let mut out = vec![0.0; self.k];
        for j in 0..self.m {
            let qj = q.get(j);
            for (i, o) in out.iter_mut().enumerate() {
                *o += qj * self.get(j, i);
            }
        }
        Ok(out)
    }

    pub fn min_marginal(&self, q: &ContextDistribution) -> Result<f64> {
        Ok(self
            .marginals(q)?
            .into_iter()
            .fold(f64::INFINITY, f64::min))
    }
}

// ── ContextDistribution ─────────────────────────────────────────────────

/// Distribution over the M contexts, with its minimum entry cached.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextDistribution {
    probs: Vec<f64>,
    min_prob: f64,
}

impl ContextDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution(
                "context distribution must have at least one entry".into(),
            ));
        }
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidDistribution(
                "context distribution entries must be finite and nonnegative".into(),
            ));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidDistribution(format!(
                "context distribution sums to {sum}, expected 1"
            )));
        }
        let min_prob = probs.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(Self { probs, min_prob })
    }

    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidDistribution(
                "context distribution must have at least one entry".into(),
            ));
        }
        Ok(Self {
            probs: vec![1.0 / m as f64; m],
            min_prob: 1.0 / m as f64,
        })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, j: usize) -> f64 {
        self.probs[j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// Minimum entry, written `u` in the sensitivity analysis.
    pub fn min_prob(&self) -> f64 {
        self.min_prob
    }

    pub fn max_prob(&self) -> f64 {
        self.probs.iter().copied().fold(0.0, f64::max)
    }

    /// `Σ_j |a(j) − b(j)|`.
    pub fn l1_distance(&self, other: &ContextDistribution) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch(
                "context distributions have different lengths".into(),
            ));
        }
        Ok(self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum())
    }
}

// ── ConstraintSpec ──────────────────────────────────────────────────────

/// True iff a fairness level leaves the feasible set nonempty, i.e. the
/// uniform policy witnesses it: `v_eff ≤ 1/k`.
pub fn feasible_nonempty(v_eff: f64, k_arms: usize) -> bool {
    k_arms >= 1 && v_eff <= 1.0 / k_arms as f64
}

/// A fairness constraint: context distribution `q`, nominal level `v`, and
/// the effective level `v_eff` actually enforced (after any slack or
/// tightening, clamped into `[0, 1/K]`).
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSpec {
    q: ContextDistribution,
    k_arms: usize,
    v: f64,
    v_eff: f64,
}

impl ConstraintSpec {
    /// Known-distribution constraint: `v_eff = v`. Requires `v < 1/K` so the
    /// uniform policy is strictly interior.
    pub fn new(q: ContextDistribution, k_arms: usize, v: f64) -> Result<Self> {
        Self::with_effective(q, k_arms, v, v)
    }

    /// Constraint with an explicit effective level; `v_eff` is clamped into
    /// `[0, 1/K]`. A raw value below 0 means the constraint is vacuous; a raw
    /// value above `1/K` must be handled by the caller (the epoch learner
    /// falls back to the uniform policy in that case).
    pub fn with_effective(
        q: ContextDistribution,
        k_arms: usize,
        v: f64,
        v_eff: f64,
    ) -> Result<Self> {
        if k_arms == 0 {
            return Err(Error::InvalidParameter("k_arms must be positive".into()));
        }
        let cap = 1.0 / k_arms as f64;
        if !v.is_finite() || v < 0.0 || v >= cap {
            return Err(Error::InfeasibleConstraint { v_eff: v, cap });
        }
        if !v_eff.is_finite() {
            return Err(Error::InvalidParameter("v_eff must be finite".into()));
        }
        Ok(Self {
            q,
            k_arms,
            v,
            v_eff: v_eff.clamp(0.0, cap),
        })
    }

    pub fn q(&self) -> &ContextDistribution {
        &self.q
    }

    pub fn num_contexts(&self) -> usize {
        self.q.len()
    }

    pub fn k_arms(&self) -> usize {
        self.k_arms
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn v_eff(&self) -> f64 {
        self.v_eff
    }

    pub fn feasible_nonempty(&self) -> bool {
        feasible_nonempty(self.v_eff, self.k_arms)
    }
}

// ── Feasibility report ──────────────────────────────────────────────────

/// Outcome of checking a policy against a constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub feasible: bool,
    /// Largest `|row sum − 1|` over rows.
    pub max_row_sum_error: f64,
    /// Largest distance of any entry below 0 or above 1.
    pub max_entry_violation: f64,
    /// Smallest marginal pull probability over arms.
    pub min_marginal: f64,
    /// `min_marginal − v_eff`; negative when the constraint is violated.
    pub worst_slack: f64,
}

/// Checks the simplex and marginal-rate invariants of a policy at tolerance
/// `tol`. Errors only on dimension mismatch; value violations are reported.
pub fn validate_policy(p: &Policy, c: &ConstraintSpec, tol: f64) -> Result<FeasibilityReport> {
    if p.num_contexts() != c.num_contexts() || p.num_arms() != c.k_arms() {
        return Err(Error::DimensionMismatch(format!(
            "policy is {}x{}, constraint expects {}x{}",
            p.num_contexts(),
            p.num_arms(),
            c.num_contexts(),
            c.k_arms()
        )));
    }
    let mut max_row_sum_error: f64 = 0.0;
    let mut max_entry_violation: f64 = 0.0;
    for j in 0..p.num_contexts() {
        let row = p.row(j);
        let sum: f64 = row.iter().sum();
        max_row_sum_error = max_row_sum_error.max((sum - 1.0).abs());
        for &x in row {
            max_entry_violation = max_entry_violation.max((-x).max(x - 1.0).max(0.0));
        }
    }
    let min_marginal = p.min_marginal(c.q())?;
    let worst_slack = min_marginal - c.v_eff();
    let feasible =
        max_row_sum_error <= tol && max_entry_violation <= tol && worst_slack >= -tol;
    Ok(FeasibilityReport {
        feasible,
        max_row_sum_error,
        max_entry_violation,
        min_marginal,
        worst_slack,
    })
}

// ── LossVector ──────────────────────────────────────────────────────────

/// Per-arm losses for one round, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossVector {
    values: Vec<f64>,
}

impl LossVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter(
                "loss vector must have at least one entry".into(),
            ));
        }
        if values.iter().any(|&l| !(0.0..=1.0).contains(&l)) {
            return Err(Error::InvalidParameter(
                "loss vector entries must lie in [0, 1]".into(),
            ));
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

// ── Trace ───────────────────────────────────────────────────────────────

/// One completed round: context, the policy the learner sampled from, the
/// chosen arm, the full loss vector, and the realized loss.
#[derive(Debug, Clone)]
pub struct TraceRound {
    pub t: usize,
    pub context: usize,
    pub policy: Policy,
    pub arm: usize,
    pub losses: LossVector,
    pub realized: f64,
}

/// Round-by-round record of a simulation. Rounds are numbered from 1 and
/// appended in order; the full loss vectors are kept so regret against the
/// best fixed feasible policy can be computed afterwards, even though the
/// learner itself only ever saw the realized entry.
#[derive(Debug, Clone)]
pub struct Trace {
    m: usize,
    k: usize,
    rounds: Vec<TraceRound>,
}

impl Trace {
    pub fn new(m: usize, k: usize) -> Self {
        Self {
            m,
            k,
            rounds: Vec::new(),
        }
    }

    pub fn push(
        &mut self,
        context: usize,
        policy: Policy,
        arm: usize,
        losses: LossVector,
    ) -> Result<()> {
        if context >= self.m {
            return Err(Error::InvalidParameter(format!(
                "context {context} out of range for {} contexts",
                self.m
            )));
        }
        if arm >= self.k {
            return Err(Error::InvalidParameter(format!(
                "arm {arm} out of range for {} arms",
                self.k
            )));
        }
        if policy.num_contexts() != self.m || policy.num_arms() != self.k {
            return Err(Error::DimensionMismatch(
                "policy snapshot does not match trace dimensions".into(),
            ));
        }
        if losses.len() != self.k {
            return Err(Error::DimensionMismatch(
                "loss vector does not match trace dimensions".into(),
            ));
        }
        let realized = losses.get(arm);
        self.rounds.push(TraceRound {
            t: self.rounds.len() + 1,
            context,
            policy,
            arm,
            losses,
            realized,
        });
        Ok(())
    }

    pub fn num_contexts(&self) -> usize {
        self.m
    }

    pub fn num_arms(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn rounds(&self) -> &[TraceRound] {
        &self.rounds
    }
}
