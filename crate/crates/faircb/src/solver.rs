//! Constrained entropic-FTRL solves.
//!
//! The per-round program minimizes
//!
//! ```text
//!     ⟨P, g⟩ + (1/η) Σ_{j,i} p^j(i) ln p^j(i)
//! ```
//!
//! over the product of K-simplices subject to the per-arm marginal
//! constraints `Σ_j q(j) p^j(i) ≥ v_eff`.
//!
//! Method: ascent on the Lagrange dual. For a fixed multiplier vector
//! `λ ≥ 0` the inner minimizer is a per-context softmax,
//! `p^j(i) ∝ exp(−η (g[j,i] − λ_i q(j)))`, so one dual evaluation costs
//! O(MK). The dual partial derivatives are the constraint residuals
//! `v_eff − marginal_i`, each monotone in its own multiplier, and the
//! default rule maximizes one coordinate at a time by bisection on that
//! residual (a fixed projected-gradient step is available as an alternate
//! rule). Mixing the inner iterate toward the uniform policy makes it
//! exactly feasible, and the duality gap between that point and the dual
//! value certifies optimality: at a certified solve, complementary
//! slackness is bounded by the gap itself. Strong duality holds because
//! the uniform policy is strictly feasible whenever `v_eff < 1/K`.
//!
//! [`brute_force_step`] is an independent grid-search oracle over the same
//! objective, used by the test suites to cross-check the dual path.

use crate::error::{Error, Result};
use crate::policy::{ConstraintSpec, ContextDistribution, LossVector, Policy};

/// Exponentials are floored here before normalization so no probability is
/// ever exactly zero.
const PROB_FLOOR: f64 = 1e-300;

/// Marginal overshoot applied to the returned policy so that recomputing
/// marginals in floating point never lands below `v_eff`.
const FEASIBILITY_MARGIN: f64 = 1e-13;

/// `best_fixed_policy` solves with `η = LP_ETA_SCALE / max(g)` so the
/// entropy term vanishes relative to the linear objective.
const LP_ETA_SCALE: f64 = 1e4;

// ── Cumulative loss estimates ───────────────────────────────────────────

/// Cumulative (importance-weighted) loss estimates, one nonnegative entry
/// per (context, arm) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeLoss {
    m: usize,
    k: usize,
    g: Vec<f64>,
}

impl CumulativeLoss {
    pub fn zeros(m: usize, k: usize) -> Result<Self> {
        if m == 0 || k == 0 {
            return Err(Error::InvalidParameter(
                "cumulative loss dimensions must be positive".into(),
            ));
        }
        Ok(Self {
            m,
            k,
            g: vec![0.0; m * k],
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        let k = rows.first().map(Vec::len).unwrap_or(0);
        if m == 0 || k == 0 || rows.iter().any(|r| r.len() != k) {
            return Err(Error::DimensionMismatch(
                "cumulative loss rows must be nonempty and rectangular".into(),
            ));
        }
        let g = rows.concat();
        if g.iter().any(|&x| !x.is_finite() || x < 0.0) {
            return Err(Error::InvalidParameter(
                "cumulative loss entries must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { m, k, g })
    }

    pub fn num_contexts(&self) -> usize {
        self.m
    }

    pub fn num_arms(&self) -> usize {
        self.k
    }

    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.g[j * self.k + i]
    }

    pub fn add(&mut self, j: usize, i: usize, delta: f64) -> Result<()> {
        if j >= self.m || i >= self.k {
            return Err(Error::InvalidParameter(format!(
                "cell ({j}, {i}) out of range for {}x{}",
                self.m, self.k
            )));
        }
        if !delta.is_finite() || delta < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "loss increment {delta} must be finite and nonnegative"
            )));
        }
        self.g[j * self.k + i] += delta;
        Ok(())
    }

    pub fn max_entry(&self) -> f64 {
        self.g.iter().copied().fold(0.0, f64::max)
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.g[j * self.k..(j + 1) * self.k]
    }
}

// ── Solver configuration and dual certificate ───────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepRule {
    /// Fixed projected-gradient dual step `1 / (η · max_j q(j)² · K)`.
    Fixed,
    /// Adaptive rule: exact per-coordinate dual ascent via bisection on the
    /// monotone constraint residual. Default.
    Backtracking,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub eta: f64,
    pub max_iters: usize,
    pub gap_tol: f64,
    pub step_rule: StepRule,
}

impl SolverConfig {
    pub fn new(eta: f64) -> Result<Self> {
        if !eta.is_finite() || eta <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "learning rate eta = {eta} must be positive"
            )));
        }
        Ok(Self {
            eta,
            max_iters: 10_000,
            gap_tol: 1e-8,
            step_rule: StepRule::Backtracking,
        })
    }

    pub fn with_gap_tol(mut self, gap_tol: f64) -> Self {
        self.gap_tol = gap_tol;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_step_rule(mut self, step_rule: StepRule) -> Self {
        self.step_rule = step_rule;
        self
    }
}

/// Dual certificate attached to a converged solve. `gap` and `comp_slack`
/// are measured at the certified feasible iterate; the returned policy adds
/// a uniform nudge of marginal size at most [`FEASIBILITY_MARGIN`] on top of
/// it so that its recomputed marginals stay strictly above `v_eff`.
#[derive(Debug, Clone)]
pub struct DualState {
    /// Multipliers of the K fairness constraints, all nonnegative.
    pub lambda: Vec<f64>,
    /// Primal objective at the certified iterate minus the dual value,
    /// floored at zero.
    pub gap: f64,
    pub iterations: usize,
    /// `max_i λ_i (marginal_i − v_eff)` at the certified iterate.
    pub comp_slack: f64,
}

// ── Softmax primitives ──────────────────────────────────────────────────

/// Writes `softmax(scores)` into `out` with max-subtraction; exponentials
/// are floored at [`PROB_FLOOR`].
pub(crate) fn softmax_into(scores: &[f64], out: &mut [f64]) {
    let smax = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &s) in out.iter_mut().zip(scores) {
        *o = (s - smax).exp().max(PROB_FLOOR);
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

fn inner_rows_into(
    g: &CumulativeLoss,
    eta: f64,
    lambda: &[f64],
    q: &ContextDistribution,
    rows: &mut [f64],
) {
    let (m, k) = (g.num_contexts(), g.num_arms());
    let mut scores = vec![0.0; k];
    for j in 0..m {
        let qj = q.get(j);
        for (i, s) in scores.iter_mut().enumerate() {
            *s = -eta * (g.get(j, i) - lambda[i] * qj);
        }
        softmax_into(&scores, &mut rows[j * k..(j + 1) * k]);
    }
}

fn marginals_of(rows: &[f64], q: &ContextDistribution, m: usize, k: usize) -> Vec<f64> {
    let mut out = vec![0.0; k];
    for j in 0..m {
        let qj = q.get(j);
        for (i, o) in out.iter_mut().enumerate() {
            *o += qj * rows[j * k + i];
        }
    }
    out
}

/// `⟨P, g⟩ + (1/η) Σ p ln p` evaluated at flat rows.
fn primal_value(g: &CumulativeLoss, eta: f64, rows: &[f64]) -> f64 {
    let (m, k) = (g.num_contexts(), g.num_arms());
    let mut lin = 0.0;
    let mut ent = 0.0;
    for j in 0..m {
        for i in 0..k {
            let p = rows[j * k + i];
            lin += p * g.get(j, i);
            if p > 0.0 {
                ent += p * p.ln();
            }
        }
    }
    lin + ent / eta
}

/// `v_eff Σ λ − (1/η) Σ_j ln Σ_i exp(−η (g[j,i] − λ_i q(j)))`.
fn dual_value(
    g: &CumulativeLoss,
    eta: f64,
    lambda: &[f64],
    q: &ContextDistribution,
    v_eff: f64,
) -> f64 {
    let (m, k) = (g.num_contexts(), g.num_arms());
    let mut d = v_eff * lambda.iter().sum::<f64>();
    for j in 0..m {
        let qj = q.get(j);
        let mut smax = f64::NEG_INFINITY;
        for i in 0..k {
            let s = -eta * (g.get(j, i) - lambda[i] * qj);
            if s > smax {
                smax = s;
            }
        }
        let mut sum = 0.0;
        for i in 0..k {
            let s = -eta * (g.get(j, i) - lambda[i] * qj);
            sum += (s - smax).exp();
        }
        d -= (smax + sum.ln()) / eta;
    }
    d
}

/// Mixes the rows toward uniform until every marginal reaches `target`.
/// Returns the mixing weight. Requires `target ≤ 1/k`.
fn mix_rows_to_target(rows: &mut [f64], marginals: &[f64], target: f64, k: usize) -> f64 {
    let m_min = marginals.iter().copied().fold(f64::INFINITY, f64::min);
    if m_min >= target {
        return 0.0;
    }
    let unif = 1.0 / k as f64;
    if unif <= m_min {
        return 0.0;
    }
    let theta = ((target - m_min) / (unif - m_min)).clamp(0.0, 1.0);
    for x in rows.iter_mut() {
        *x = (1.0 - theta) * *x + theta * unif;
    }
    theta
}

fn finalize_rows(
    mut rows: Vec<f64>,
    q: &ContextDistribution,
    v_eff: f64,
    m: usize,
    k: usize,
) -> Vec<f64> {
    let cap = 1.0 / k as f64;
    let margin = FEASIBILITY_MARGIN.min((cap - v_eff) / 2.0);
    if margin > 0.0 {
        let marg = marginals_of(&rows, q, m, k);
        mix_rows_to_target(&mut rows, &marg, v_eff + margin, k);
    }
    rows
}

// ── Public solves ───────────────────────────────────────────────────────

/// Closed-form minimizer of the Lagrangian at fixed multipliers:
/// `p^j(i) ∝ exp(−η (g[j,i] − λ_i q(j)))`, each row normalized.
pub fn inner_policy(
    g: &CumulativeLoss,
    cfg: &SolverConfig,
    lambda: &[f64],
    q: &ContextDistribution,
) -> Result<Policy> {
    let (m, k) = (g.num_contexts(), g.num_arms());
    if q.len() != m || lambda.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "inner_policy: g is {m}x{k}, q has {} entries, lambda has {}",
            q.len(),
            lambda.len()
        )));
    }
    if lambda.iter().any(|&l| !l.is_finite() || l < 0.0) {
        return Err(Error::InvalidParameter(
            "multipliers must be finite and nonnegative".into(),
        ));
    }
    if g.g.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidParameter(
            "cumulative loss contains NaN".into(),
        ));
    }
    let mut rows = vec![0.0; m * k];
    inner_rows_into(g, cfg.eta, lambda, q, &mut rows);
    Policy::new(m, k, rows)
}

/// One constrained FTRL solve starting from `λ = 0`.
pub fn solve_ftrl_step(
    g: &CumulativeLoss,
    c: &ConstraintSpec,
    cfg: &SolverConfig,
) -> Result<(Policy, DualState)> {
    solve_ftrl_step_warm(g, c, cfg, None)
}

/// One constrained FTRL solve, optionally warm-started from the previous
/// round's multipliers. The learner passes them because the cumulative loss
/// changes by a single rank-1 increment per round.
pub fn solve_ftrl_step_warm(
    g: &CumulativeLoss,
    c: &ConstraintSpec,
    cfg: &SolverConfig,
    warm: Option<&[f64]>,
) -> Result<(Policy, DualState)> {
    let (m, k) = (g.num_contexts(), g.num_arms());
    if c.num_contexts() != m || c.k_arms() != k {
        return Err(Error::DimensionMismatch(format!(
            "solve: g is {m}x{k}, constraint expects {}x{}",
            c.num_contexts(),
            c.k_arms()
        )));
    }
    if g.g.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter(
            "cumulative loss contains non-finite entries".into(),
        ));
    }
    let v_eff = c.v_eff();
    let cap = 1.0 / k as f64;
    if v_eff > cap {
        return Err(Error::InfeasibleConstraint { v_eff, cap });
    }
    let q = c.q();

    // Vacuous constraint: the joint program separates per context and the
    // solution is the plain rowwise softmax (the Exp3 special case).
    if v_eff <= 0.0 {
        let mut rows = vec![0.0; m * k];
        let lambda = vec![0.0; k];
        inner_rows_into(g, cfg.eta, &lambda, q, &mut rows);
        let policy = Policy::new(m, k, rows)?;
        return Ok((
            policy,
            DualState {
                lambda,
                gap: 0.0,
                iterations: 0,
                comp_slack: 0.0,
            },
        ));
    }

    let qmax = q.max_prob();
    let base_step = 1.0 / (cfg.eta * qmax * qmax * k as f64);
    let mut lambda: Vec<f64> = match warm {
        Some(w) if w.len() == k => w.iter().map(|&x| x.max(0.0)).collect(),
        _ => vec![0.0; k],
    };
    let mut rows = vec![0.0; m * k];
    let mut best: Option<(Vec<f64>, f64, f64)> = None;
    let mut iterations = 0usize;
    let max_updates = cfg.max_iters.max(1);

    loop {
        inner_rows_into(g, cfg.eta, &lambda, q, &mut rows);
        let marg = marginals_of(&rows, q, m, k);

        let mut mixed = rows.clone();
        mix_rows_to_target(&mut mixed, &marg, v_eff, k);
        let marg_mixed = marginals_of(&mixed, q, m, k);
        let f = primal_value(g, cfg.eta, &mixed);
        let d = dual_value(g, cfg.eta, &lambda, q, v_eff);
        let gap = (f - d).max(0.0);
        let comp_slack = lambda
            .iter()
            .zip(&marg_mixed)
            .map(|(&l, &mi)| l * (mi - v_eff))
            .fold(0.0f64, f64::max);

        if best.as_ref().map_or(true, |b| gap < b.1) {
            best = Some((mixed.clone(), gap, comp_slack));
        }
        if gap <= cfg.gap_tol {
            let final_rows = finalize_rows(mixed, q, v_eff, m, k);
            let policy = Policy::new(m, k, final_rows)?;
            return Ok((
                policy,
                DualState {
                    lambda,
                    gap,
                    iterations,
                    comp_slack,
                },
            ));
        }
        if iterations >= max_updates {
            break;
        }

        match cfg.step_rule {
            StepRule::Fixed => {
                // projected gradient step along the constraint residual
                for (l, &mi) in lambda.iter_mut().zip(&marg) {
                    *l = (*l + base_step * (v_eff - mi)).max(0.0);
                }
                iterations += 1;
            }
            StepRule::Backtracking => {
                // One cycle of exact per-coordinate ascent. The partial
                // derivative v_eff − marginal_i is monotone in λ_i, so its
                // root is found by bisection; this stays accurate where the
                // saturated softmax makes the dual value itself too flat
                // for line-search comparisons.
                for i in 0..k {
                    coordinate_ascent(g, cfg.eta, q, v_eff, &mut lambda, i);
                    iterations += 1;
                }
            }
        }
    }

    let (mixed, gap, _) = best.expect("certificate evaluated at least once");
    let final_rows = finalize_rows(mixed, q, v_eff, m, k);
    let policy = Policy::new(m, k, final_rows)?;
    Err(Error::NonConvergence {
        iterations,
        gap,
        best: Box::new(policy),
    })
}

/// Marginal of arm `i` with `λ_i` replaced by `x`, other coordinates fixed.
fn marginal_with(
    g: &CumulativeLoss,
    eta: f64,
    q: &ContextDistribution,
    lambda: &[f64],
    i: usize,
    x: f64,
) -> f64 {
    let (m, k) = (g.num_contexts(), g.num_arms());
    let mut total = 0.0;
    for j in 0..m {
        let qj = q.get(j);
        if qj == 0.0 {
            continue;
        }
        let score = |ii: usize| {
            let l = if ii == i { x } else { lambda[ii] };
            -eta * (g.get(j, ii) - l * qj)
        };
        let mut smax = f64::NEG_INFINITY;
        for ii in 0..k {
            smax = smax.max(score(ii));
        }
        let mut sum = 0.0;
        let mut pi = 0.0;
        for ii in 0..k {
            let e = (score(ii) - smax).exp().max(PROB_FLOOR);
            sum += e;
            if ii == i {
                pi = e;
            }
        }
        total += qj * pi / sum;
    }
    total
}

/// Exact maximization of the dual in coordinate `i`: the partial derivative
/// `v_eff − marginal_i(λ_i)` is nonincreasing in `λ_i`, so the update is a
/// bisection for its root (clamped at zero).
fn coordinate_ascent(
    g: &CumulativeLoss,
    eta: f64,
    q: &ContextDistribution,
    v_eff: f64,
    lambda: &mut [f64],
    i: usize,
) {
    let resid_at = |x: f64| v_eff - marginal_with(g, eta, q, lambda, i, x);
    if resid_at(0.0) <= 0.0 {
        lambda[i] = 0.0;
        return;
    }
    let mut lo = 0.0f64;
    let mut hi = lambda[i].max(1.0);
    let mut guard = 0;
    while resid_at(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            break;
        }
    }
    for _ in 0..120 {
        if hi - lo <= 1e-14 * hi.max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if resid_at(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lambda[i] = 0.5 * (lo + hi);
}

// ── Hindsight optimum ───────────────────────────────────────────────────

/// Best fixed feasible policy in hindsight: the minimizer over the
/// constrained set of `Σ_t ⟨p^{j_t}, l_t⟩`, computed by a solve on the
/// summed true losses with vanishing regularization
/// (`η = 1e4 / max entry`). The linear objective of the result is within
/// `10·M·ln K / η` of the exact LP optimum: the entropy term contributes at
/// most `M ln K / η` twice and the solve is certified to a gap of the same
/// order.
pub fn best_fixed_policy<'a, I>(losses: I, c: &ConstraintSpec) -> Result<Policy>
where
    I: IntoIterator<Item = (usize, &'a LossVector)>,
{
    let (m, k) = (c.num_contexts(), c.k_arms());
    let mut g = CumulativeLoss::zeros(m, k)?;
    let mut rounds = 0usize;
    for (j, l) in losses {
        if j >= m || l.len() != k {
            return Err(Error::DimensionMismatch(
                "loss sequence does not match the constraint dimensions".into(),
            ));
        }
        for i in 0..k {
            g.add(j, i, l.get(i))?;
        }
        rounds += 1;
    }
    if rounds == 0 {
        return Err(Error::EmptyTrace);
    }
    let gmax = g.max_entry();
    let eta_eff = if gmax > 0.0 { LP_ETA_SCALE / gmax } else { 1.0 };
    let entropy_span = m as f64 * (k as f64).ln();
    let gap_tol = (entropy_span / eta_eff).max(1e-9);
    let cfg = SolverConfig {
        eta: eta_eff,
        max_iters: 200_000,
        gap_tol,
        step_rule: StepRule::Backtracking,
    };
    Ok(solve_ftrl_step(&g, c, &cfg)?.0)
}

// ── Grid-search oracle ──────────────────────────────────────────────────

/// Grid-search minimizer of the same objective over the feasible set, kept
/// independent of the dual path so it can serve as a test oracle.
///
/// Rows are enumerated on lattices of shrinking spacing (first K−1
/// coordinates free, last the remainder). The sweep starts at the requested
/// resolution when the full lattice is affordable and coarser otherwise,
/// then keeps shrinking a box around the incumbent to sub-resolution
/// spacing: along nearly flat valleys the single-lattice argmin can sit
/// several cells from the true minimizer, so refinement continues until the
/// returned point localizes the constrained optimum to within the requested
/// resolution. A level whose incumbent lands on the box boundary is retried
/// with a doubled box before shrinking, so the minimizer cannot escape.
/// The objective is strictly convex on a convex set, which makes the
/// box-following sound. Supports M ≤ 3, K ≤ 3.
pub fn brute_force_step(
    g: &CumulativeLoss,
    c: &ConstraintSpec,
    cfg: &SolverConfig,
    resolution: f64,
) -> Result<Policy> {
    if !(resolution > 0.0) || !resolution.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "grid resolution {resolution} must be positive"
        )));
    }
    let (m, k) = (g.num_contexts(), g.num_arms());
    if c.num_contexts() != m || c.k_arms() != k {
        return Err(Error::DimensionMismatch(
            "oracle: cumulative loss and constraint dimensions differ".into(),
        ));
    }
    if m > 3 || k > 3 {
        return Err(Error::InvalidParameter(
            "grid oracle supports at most 3 contexts and 3 arms".into(),
        ));
    }
    let v_eff = c.v_eff();
    let q = c.q();

    // The uniform policy is always feasible for v_eff ≤ 1/K and seeds the
    // incumbent in case a coarse level finds no feasible lattice point.
    let mut best_rows = vec![1.0 / k as f64; m * k];
    let mut best_obj = primal_value(g, cfg.eta, &best_rows);

    let per_row_full = match k {
        1 => 1.0,
        2 => 1.0 / resolution + 1.0,
        _ => (1.0 / resolution + 1.0) * (1.0 / resolution + 2.0) / 2.0,
    };
    let direct = per_row_full.powi(m as i32) <= 2e6;

    let mut lo = vec![0.0; m * k];
    let mut hi = vec![1.0; m * k];
    let mut h = if direct {
        resolution
    } else {
        (1.0 / 16.0f64).max(resolution)
    };
    loop {
        grid_level(g, cfg.eta, q, v_eff, m, k, h, &lo, &hi, &mut best_rows, &mut best_obj);
        if h <= resolution {
            break;
        }
        for (idx, &b) in best_rows.iter().enumerate() {
            lo[idx] = (b - 2.5 * h).max(0.0);
            hi[idx] = (b + 2.5 * h).min(1.0);
        }
        h = (h / 4.0).max(resolution);
    }
    // Along a nearly flat valley on the active-constraint manifold the pure
    // lattice argmin can sit several cells sideways of the true minimizer,
    // so the lattice point is polished with exact line searches over
    // first-principles feasible moves until it localizes the optimum.
    polish_rows(g, cfg.eta, q, v_eff, m, k, &mut best_rows, &mut best_obj);
    Policy::new(m, k, best_rows)
}

/// Exact 1-D minimization along feasible moves: within-row transfers (one
/// row shifts mass between two arms, bounded by the marginal constraint)
/// and marginal-neutral exchanges (two rows trade mass on the same arm
/// pair in proportion to their context weights). Each move is convex in
/// its step size, so bisection on the directional derivative is exact.
fn polish_rows(
    g: &CumulativeLoss,
    eta: f64,
    q: &ContextDistribution,
    v_eff: f64,
    m: usize,
    k: usize,
    rows: &mut [f64],
    obj: &mut f64,
) {
    const LN_FLOOR: f64 = 1e-18;
    let dphi = |gv: f64, p: f64| gv + (p.max(LN_FLOOR).ln() + 1.0) / eta;
    let mut marg = marginals_of(rows, q, m, k);
    for _sweep in 0..400 {
        let before = *obj;
        // within-row transfers
        for j in 0..m {
            let qj = q.get(j);
            for a in 0..k {
                for b in 0..k {
                    if a == b {
                        continue;
                    }
                    let pa = rows[j * k + a];
                    let mut dmax = pa;
                    if qj > 0.0 {
                        dmax = dmax.min((marg[a] - v_eff) / qj);
                    }
                    if dmax <= 0.0 {
                        continue;
                    }
                    let deriv = |d: f64| {
                        dphi(g.get(j, b), rows[j * k + b] + d) - dphi(g.get(j, a), pa - d)
                    };
                    if deriv(0.0) >= 0.0 {
                        continue;
                    }
                    let step = if deriv(dmax) <= 0.0 {
                        dmax
                    } else {
                        bisect_root(&deriv, 0.0, dmax)
                    };
                    if step <= 0.0 {
                        continue;
                    }
                    rows[j * k + a] -= step;
                    rows[j * k + b] += step;
                    marg[a] -= qj * step;
                    marg[b] += qj * step;
                }
            }
        }
        // marginal-neutral exchanges across rows
        for j1 in 0..m {
            let q1 = q.get(j1);
            if q1 <= 0.0 {
                continue;
            }
            for j2 in 0..m {
                let q2 = q.get(j2);
                if j1 == j2 || q2 <= 0.0 {
                    continue;
                }
                for a in 0..k {
                    for b in 0..k {
                        if a == b {
                            continue;
                        }
                        // row j1 moves t/q1 from a to b, row j2 moves t/q2
                        // from b to a; marginals stay fixed
                        let tmax = (rows[j1 * k + a] * q1).min(rows[j2 * k + b] * q2);
                        if tmax <= 0.0 {
                            continue;
                        }
                        let deriv = |t: f64| {
                            (dphi(g.get(j1, b), rows[j1 * k + b] + t / q1)
                                - dphi(g.get(j1, a), rows[j1 * k + a] - t / q1))
                                / q1
                                + (dphi(g.get(j2, a), rows[j2 * k + a] + t / q2)
                                    - dphi(g.get(j2, b), rows[j2 * k + b] - t / q2))
                                    / q2
                        };
                        if deriv(0.0) >= 0.0 {
                            continue;
                        }
                        let step = if deriv(tmax) <= 0.0 {
                            tmax
                        } else {
                            bisect_root(&deriv, 0.0, tmax)
                        };
                        if step <= 0.0 {
                            continue;
                        }
                        rows[j1 * k + a] -= step / q1;
                        rows[j1 * k + b] += step / q1;
                        rows[j2 * k + b] -= step / q2;
                        rows[j2 * k + a] += step / q2;
                    }
                }
            }
        }
        for x in rows.iter_mut() {
            *x = x.clamp(0.0, 1.0);
        }
        marg = marginals_of(rows, q, m, k);
        let now = primal_value(g, eta, rows);
        *obj = now;
        if before - now < 1e-14 * (1.0 + now.abs()) {
            break;
        }
    }
}

fn bisect_root(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    // f(lo) < 0 <= f(hi); returns the sign change point
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Enumerates lattice rows within per-coordinate boxes for one context.
fn row_candidates(
    k: usize,
    h: f64,
    lo: &[f64],
    hi: &[f64],
    g_row: &[f64],
    eta: f64,
) -> Vec<(Vec<f64>, f64)> {
    let mut out = Vec::new();
    let obj = |row: &[f64]| -> f64 {
        let mut v = 0.0;
        for (i, &p) in row.iter().enumerate() {
            v += p * g_row[i];
            if p > 0.0 {
                v += p * p.ln() / eta;
            }
        }
        v
    };
    let in_box = |x: f64, i: usize| x >= lo[i] - 1e-9 && x <= hi[i] + 1e-9;
    let lattice = |lo_i: f64| -> (i64, i64) {
        // lattice indices n with n·h inside [lo_i, 1]
        let start = ((lo_i - 1e-9) / h).ceil().max(0.0) as i64;
        let end = ((1.0 + 1e-9) / h).floor() as i64;
        (start, end)
    };
    match k {
        1 => {
            if in_box(1.0, 0) {
                out.push((vec![1.0], obj(&[1.0])));
            }
        }
        2 => {
            let (s0, e0) = lattice(lo[0]);
            for n0 in s0..=e0 {
                let x0 = n0 as f64 * h;
                if x0 > hi[0] + 1e-9 {
                    break;
                }
                let x1 = (1.0 - x0).clamp(0.0, 1.0);
                if (1.0 - x0) < -1e-9 || !in_box(x1, 1) {
                    continue;
                }
                let row = vec![x0.min(1.0), x1];
                let f = obj(&row);
                out.push((row, f));
            }
        }
        _ => {
            let (s0, e0) = lattice(lo[0]);
            for n0 in s0..=e0 {
                let x0 = n0 as f64 * h;
                if x0 > hi[0] + 1e-9 {
                    break;
                }
                let (s1, e1) = lattice(lo[1]);
                for n1 in s1..=e1 {
                    let x1 = n1 as f64 * h;
                    if x1 > hi[1] + 1e-9 || x0 + x1 > 1.0 + 1e-9 {
                        break;
                    }
                    let x2 = (1.0 - x0 - x1).clamp(0.0, 1.0);
                    if !in_box(x2, 2) {
                        continue;
                    }
                    let row = vec![x0.min(1.0), x1.min(1.0), x2];
                    let f = obj(&row);
                    out.push((row, f));
                }
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn grid_level(
    g: &CumulativeLoss,
    eta: f64,
    q: &ContextDistribution,
    v_eff: f64,
    m: usize,
    k: usize,
    h: f64,
    lo: &[f64],
    hi: &[f64],
    best_rows: &mut Vec<f64>,
    best_obj: &mut f64,
) {
    let mut cands: Vec<Vec<(Vec<f64>, f64)>> = Vec::with_capacity(m);
    for j in 0..m {
        let mut cj = row_candidates(
            k,
            h,
            &lo[j * k..(j + 1) * k],
            &hi[j * k..(j + 1) * k],
            g.row(j),
            eta,
        );
        cj.sort_by(|a, b| a.1.total_cmp(&b.1));
        if cj.is_empty() {
            return; // box excludes the whole simplex; keep the incumbent
        }
        cands.push(cj);
    }
    // Suffix sums for the objective bound and the remaining context mass
    // for the feasibility bound.
    let mut min_f_suffix = vec![0.0; m + 1];
    let mut q_suffix = vec![0.0; m + 1];
    for j in (0..m).rev() {
        min_f_suffix[j] = min_f_suffix[j + 1] + cands[j][0].1;
        q_suffix[j] = q_suffix[j + 1] + q.get(j);
    }

    let mut partial_marg = vec![0.0; k];
    let mut chosen: Vec<usize> = vec![0; m];

    fn descend(
        j: usize,
        m: usize,
        k: usize,
        q: &ContextDistribution,
        v_eff: f64,
        cands: &[Vec<(Vec<f64>, f64)>],
        min_f_suffix: &[f64],
        q_suffix: &[f64],
        partial_marg: &mut Vec<f64>,
        partial_obj: f64,
        chosen: &mut Vec<usize>,
        best_rows: &mut Vec<f64>,
        best_obj: &mut f64,
    ) {
        if j == m {
            if partial_obj < *best_obj {
                *best_obj = partial_obj;
                for (jj, &ci) in chosen.iter().enumerate() {
                    best_rows[jj * k..(jj + 1) * k].copy_from_slice(&cands[jj][ci].0);
                }
            }
            return;
        }
        let qj = q.get(j);
        for (ci, (row, fj)) in cands[j].iter().enumerate() {
            if partial_obj + fj + min_f_suffix[j + 1] >= *best_obj {
                break; // candidates are sorted by row objective
            }
            let mut feasible = true;
            for i in 0..k {
                if partial_marg[i] + qj * row[i] + q_suffix[j + 1] < v_eff - 1e-12 {
                    feasible = false;
                    break;
                }
            }
            if !feasible {
                continue;
            }
            for i in 0..k {
                partial_marg[i] += qj * row[i];
            }
            chosen[j] = ci;
            descend(
                j + 1,
                m,
                k,
                q,
                v_eff,
                cands,
                min_f_suffix,
                q_suffix,
                partial_marg,
                partial_obj + fj,
                chosen,
                best_rows,
                best_obj,
            );
            for i in 0..k {
                partial_marg[i] -= qj * row[i];
            }
        }
    }

    descend(
        0,
        m,
        k,
        q,
        v_eff,
        &cands,
        &min_f_suffix,
        &q_suffix,
        &mut partial_marg,
        0.0,
        &mut chosen,
        best_rows,
        best_obj,
    );
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(q: Vec<f64>, k: usize, v: f64) -> ConstraintSpec {
        ConstraintSpec::new(ContextDistribution::new(q).unwrap(), k, v).unwrap()
    }

    fn linf(a: &Policy, b: &Policy) -> f64 {
        a.as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn inner_policy_uniform_at_zero_loss() {
        let g = CumulativeLoss::zeros(2, 2).unwrap();
        let cfg = SolverConfig::new(1.0).unwrap();
        let q = ContextDistribution::new(vec![0.5, 0.5]).unwrap();
        let p = inner_policy(&g, &cfg, &[0.0, 0.0], &q).unwrap();
        assert!(p.as_slice().iter().all(|&x| (x - 0.5).abs() < 1e-15));
    }

    #[test]
    fn inner_policy_softmax_closed_form() {
        let g = CumulativeLoss::from_rows(&[vec![0.0, 2.0f64.ln()]]).unwrap();
        let cfg = SolverConfig::new(1.0).unwrap();
        let q = ContextDistribution::new(vec![1.0]).unwrap();
        let p = inner_policy(&g, &cfg, &[0.0, 0.0], &q).unwrap();
        assert!((p.get(0, 0) - 2.0 / 3.0).abs() < 1e-12);
        assert!((p.get(0, 1) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn inner_policy_multiplier_cancels_loss() {
        let g = CumulativeLoss::from_rows(&[vec![0.0, 10.0]]).unwrap();
        let cfg = SolverConfig::new(1.0).unwrap();
        let q = ContextDistribution::new(vec![1.0]).unwrap();
        let p = inner_policy(&g, &cfg, &[0.0, 10.0], &q).unwrap();
        assert!((p.get(0, 0) - 0.5).abs() < 1e-12);
        assert!((p.get(0, 1) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn inner_policy_rejects_nan() {
        let mut g = CumulativeLoss::zeros(1, 2).unwrap();
        g.g[0] = f64::NAN;
        let cfg = SolverConfig::new(1.0).unwrap();
        let q = ContextDistribution::new(vec![1.0]).unwrap();
        assert!(inner_policy(&g, &cfg, &[0.0, 0.0], &q).is_err());
    }

    #[test]
    fn solve_zero_loss_returns_uniform_with_zero_multipliers() {
        let g = CumulativeLoss::zeros(2, 2).unwrap();
        let c = spec(vec![0.5, 0.5], 2, 0.3);
        let cfg = SolverConfig::new(0.7).unwrap();
        let (p, ds) = solve_ftrl_step(&g, &c, &cfg).unwrap();
        assert!(p.as_slice().iter().all(|&x| (x - 0.5).abs() < 1e-9));
        assert!(ds.lambda.iter().all(|&l| l == 0.0));
        assert!(ds.gap <= cfg.gap_tol);
    }

    #[test]
    fn solve_vacuous_constraint_is_rowwise_softmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let m = rng.random_range(1..=3);
            let k = rng.random_range(2..=3);
            let rows: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..k).map(|_| rng.random_range(0.0..5.0)).collect())
                .collect();
            let g = CumulativeLoss::from_rows(&rows).unwrap();
            let eta = rng.random_range(0.05..4.0);
            let cfg = SolverConfig::new(eta).unwrap();
            let c = spec(vec![1.0 / m as f64; m], k, 0.0);
            let (p, ds) = solve_ftrl_step(&g, &c, &cfg).unwrap();
            assert_eq!(ds.iterations, 0);
            for j in 0..m {
                let mut row = vec![0.0; k];
                let scores: Vec<f64> = (0..k).map(|i| -eta * g.get(j, i)).collect();
                softmax_into(&scores, &mut row);
                for i in 0..k {
                    assert!((p.get(j, i) - row[i]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn solve_active_constraint_one_context() {
        // Objective 10 p2 + p2 ln p2 + (1-p2) ln (1-p2) over p2 >= 0.4 has its
        // unconstrained minimum near 4.5e-5, so the constraint binds and the
        // optimum sits on the boundary.
        let g = CumulativeLoss::from_rows(&[vec![0.0, 10.0]]).unwrap();
        let c = spec(vec![1.0], 2, 0.4);
        let cfg = SolverConfig::new(1.0).unwrap();
        let (p, ds) = solve_ftrl_step(&g, &c, &cfg).unwrap();
        assert!((p.get(0, 0) - 0.6).abs() < 1e-6, "got {:?}", p.row(0));
        assert!((p.get(0, 1) - 0.4).abs() < 1e-6);
        assert!(ds.lambda[1] > 1.0);
        let oracle = brute_force_step(&g, &c, &cfg, 1e-3).unwrap();
        assert!(linf(&p, &oracle) <= 2e-3);
    }

    #[test]
    fn solve_reports_nonconvergence_with_best_iterate() {
        let g = CumulativeLoss::from_rows(&[vec![0.0, 10.0]]).unwrap();
        let c = spec(vec![1.0], 2, 0.4);
        let cfg = SolverConfig::new(1.0).unwrap().with_max_iters(1);
        match solve_ftrl_step(&g, &c, &cfg) {
            Err(Error::NonConvergence { best, gap, .. }) => {
                assert!(gap > 0.0);
                let q = ContextDistribution::new(vec![1.0]).unwrap();
                assert!(best.min_marginal(&q).unwrap() >= 0.4 - 1e-12);
            }
            other => panic!("expected NonConvergence, got {other:?}"),
        }
    }

    fn random_instance(rng: &mut ChaCha8Rng) -> (CumulativeLoss, ConstraintSpec, SolverConfig) {
        let m = rng.random_range(1..=3);
        let k = rng.random_range(1..=3);
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..k).map(|_| rng.random_range(0.0..5.0)).collect())
            .collect();
        let g = CumulativeLoss::from_rows(&rows).unwrap();
        let qraw: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
        let qsum: f64 = qraw.iter().sum();
        let q = ContextDistribution::new(qraw.iter().map(|x| x / qsum).collect()).unwrap();
        let eta = 10f64.powf(rng.random_range(-2.0..1.0));
        let v_eff = rng.random_range(0.0..0.9 / k as f64);
        let c = ConstraintSpec::with_effective(q, k, v_eff.min(0.99 / k as f64), v_eff).unwrap();
        (g, c, SolverConfig::new(eta).unwrap())
    }

    #[test]
    fn kkt_certificate_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..60 {
            let (g, c, cfg) = random_instance(&mut rng);
            let (p, ds) = solve_ftrl_step(&g, &c, &cfg).unwrap();
            assert!(ds.gap <= cfg.gap_tol);
            assert!(ds.lambda.iter().all(|&l| l >= 0.0));
            assert!(ds.comp_slack <= cfg.gap_tol + 1e-10);
            let min_marg = p.min_marginal(c.q()).unwrap();
            assert!(min_marg >= c.v_eff() - 1e-12);
        }
    }

    #[test]
    fn oracle_equivalence_on_random_instances() {
        use rayon::prelude::*;
        let results: Vec<f64> = (0..50u64)
            .into_par_iter()
            .map(|seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
                let (g, c, cfg) = random_instance(&mut rng);
                let (p, _) = solve_ftrl_step(&g, &c, &cfg).unwrap();
                let oracle = brute_force_step(&g, &c, &cfg, 1e-3).unwrap();
                linf(&p, &oracle)
            })
            .collect();
        let worst = results.into_iter().fold(0.0f64, f64::max);
        assert!(worst <= 2e-3, "worst oracle deviation {worst:.3e}");
    }

    #[test]
    fn oracle_matches_softmax_when_unconstrained() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let rows: Vec<Vec<f64>> =
                vec![(0..2).map(|_| rng.random_range(0.0..3.0)).collect()];
            let g = CumulativeLoss::from_rows(&rows).unwrap();
            let cfg = SolverConfig::new(1.0).unwrap();
            let c = spec(vec![1.0], 2, 0.0);
            let (p, _) = solve_ftrl_step(&g, &c, &cfg).unwrap();
            let oracle = brute_force_step(&g, &c, &cfg, 1e-3).unwrap();
            assert!(linf(&p, &oracle) <= 1.5e-3);
        }
    }

    #[test]
    fn oracle_rejects_nonpositive_resolution() {
        let g = CumulativeLoss::zeros(1, 2).unwrap();
        let c = spec(vec![1.0], 2, 0.1);
        let cfg = SolverConfig::new(1.0).unwrap();
        assert!(brute_force_step(&g, &c, &cfg, 0.0).is_err());
    }

    #[test]
    fn objective_is_monotone_in_effective_level() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let (g, c0, cfg) = random_instance(&mut rng);
            let k = c0.k_arms();
            let mut prev = f64::NEG_INFINITY;
            for step in 0..5 {
                let v_eff = step as f64 * 0.9 / (4.0 * k as f64);
                let c =
                    ConstraintSpec::with_effective(c0.q().clone(), k, c0.v(), v_eff).unwrap();
                let (p, _) = solve_ftrl_step(&g, &c, &cfg).unwrap();
                let obj = primal_value(&g, cfg.eta, p.as_slice());
                assert!(
                    obj >= prev - 1e-6,
                    "objective decreased from {prev} to {obj} as v_eff grew"
                );
                prev = obj;
            }
        }
    }

    #[test]
    fn solution_is_arm_permutation_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..20 {
            let m = rng.random_range(1..=3);
            let k = 3;
            let rows: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..k).map(|_| rng.random_range(0.0..4.0)).collect())
                .collect();
            let g = CumulativeLoss::from_rows(&rows).unwrap();
            let qraw: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
            let qs: f64 = qraw.iter().sum();
            let qv: Vec<f64> = qraw.iter().map(|x| x / qs).collect();
            let c = spec(qv.clone(), k, 0.2);
            let cfg = SolverConfig::new(1.0).unwrap();
            let (p, _) = solve_ftrl_step(&g, &c, &cfg).unwrap();

            // rotate arms: i -> (i+1) mod k
            let rot_rows: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| vec![r[2], r[0], r[1]])
                .collect();
            let g2 = CumulativeLoss::from_rows(&rot_rows).unwrap();
            let c2 = spec(qv, k, 0.2);
            let (p2, _) = solve_ftrl_step(&g2, &c2, &cfg).unwrap();
            for j in 0..m {
                for i in 0..k {
                    let rotated = p2.get(j, (i + 1) % k);
                    assert!(
                        (p.get(j, i) - rotated).abs() < 1e-6,
                        "permutation mismatch at ({j},{i})"
                    );
                }
            }
        }
    }

    #[test]
    fn best_fixed_puts_mass_on_the_winning_arm() {
        let c = spec(vec![1.0], 2, 0.0);
        let l = LossVector::new(vec![0.0, 1.0]).unwrap();
        let p = best_fixed_policy([(0usize, &l)], &c).unwrap();
        assert!(p.get(0, 0) > 0.999);
    }

    #[test]
    fn best_fixed_symmetric_losses_match_uniform_objective() {
        let c = spec(vec![1.0], 2, 0.0);
        let l = LossVector::new(vec![0.4, 0.4]).unwrap();
        let seq: Vec<(usize, &LossVector)> = (0..10).map(|_| (0usize, &l)).collect();
        let p = best_fixed_policy(seq, &c).unwrap();
        let obj: f64 = (0..2).map(|i| p.get(0, i) * 4.0).sum();
        assert!((obj - 4.0 * 0.5 * 2.0).abs() < 1e-9); // equals the uniform value
    }

    #[test]
    fn best_fixed_two_contexts_diagonal() {
        // Per-context cumulative losses ((0.2, 0.8), (0.8, 0.2))·T with even
        // contexts and v = 0.45: arm 1 in context 1, arm 2 in context 2, and
        // marginals (0.5, 0.5) stay feasible, so the LP vertex is the
        // identity assignment (checked against the grid oracle).
        let t = 50.0;
        let rows = vec![vec![0.2 * t, 0.8 * t], vec![0.8 * t, 0.2 * t]];
        let g = CumulativeLoss::from_rows(&rows).unwrap();
        let c = spec(vec![0.5, 0.5], 2, 0.45);
        let l1 = LossVector::new(vec![0.2, 0.8]).unwrap();
        let l2 = LossVector::new(vec![0.8, 0.2]).unwrap();
        let mut seq = Vec::new();
        for _ in 0..50 {
            seq.push((0usize, &l1));
            seq.push((1usize, &l2));
        }
        let p = best_fixed_policy(seq, &c).unwrap();
        assert!(p.get(0, 0) > 0.99, "{:?}", p.row(0));
        assert!(p.get(1, 1) > 0.99, "{:?}", p.row(1));
        let marg = p
            .marginals(&ContextDistribution::new(vec![0.5, 0.5]).unwrap())
            .unwrap();
        assert!((marg[0] - 0.5).abs() < 0.01 && (marg[1] - 0.5).abs() < 0.01);

        let eta_eff = LP_ETA_SCALE / g.max_entry();
        let cfg = SolverConfig::new(eta_eff).unwrap();
        let oracle = brute_force_step(&g, &c, &cfg, 1e-3).unwrap();
        assert!(linf(&p, &oracle) <= 5e-3);
    }

    #[test]
    fn sensitivity_of_hindsight_optimum_to_tightening() {
        // Tightening the constraint from v to v + M·eps moves the hindsight
        // optimum by at most C·M·eps/u in the sup norm, with C = 10 used as
        // a diagnostic threshold; the observed worst ratio is printed.
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let mut max_ratio = 0.0f64;
        for _ in 0..50 {
            let m = rng.random_range(1..=3usize);
            let k = rng.random_range(2..=3usize);
            let mut qraw: Vec<f64> = (0..m).map(|_| rng.random_range(0.25..1.0)).collect();
            let qs: f64 = qraw.iter().sum();
            for x in qraw.iter_mut() {
                *x /= qs;
            }
            let q = ContextDistribution::new(qraw).unwrap();
            let u = q.min_prob();
            if u < 0.2 {
                continue;
            }
            let cap = 1.0 / k as f64;
            let v = rng.random_range(0.0..0.6 * cap);
            let eps_hi = (0.05f64).min((cap - v) / (2.0 * m as f64));
            let eps = rng.random_range(0.005f64..eps_hi.max(0.0051));
            let rounds = 30;
            let losses: Vec<(usize, LossVector)> = (0..rounds)
                .map(|_| {
                    let j = rng.random_range(0..m);
                    let l = LossVector::new(
                        (0..k).map(|_| rng.random_range(0.0..1.0)).collect(),
                    )
                    .unwrap();
                    (j, l)
                })
                .collect();
            let c1 = ConstraintSpec::new(q.clone(), k, v).unwrap();
            let c2 = ConstraintSpec::new(q.clone(), k, v + m as f64 * eps).unwrap();
            let p1 = best_fixed_policy(losses.iter().map(|(j, l)| (*j, l)), &c1).unwrap();
            let p2 = best_fixed_policy(losses.iter().map(|(j, l)| (*j, l)), &c2).unwrap();
            let dist = linf(&p1, &p2);
            let bound = m as f64 * eps / u;
            max_ratio = max_ratio.max(dist / bound);
            assert!(
                dist <= 10.0 * bound,
                "distance {dist:.4} exceeds 10x bound {bound:.4}"
            );
        }
        println!("sensitivity diagnostic: max observed distance/(M*eps/u) = {max_ratio:.3}");
    }
}
