//! Learner for an unknown context distribution.
//!
//! The horizon is split into doubling epochs, epoch k covering rounds
//! `τ_k .. τ_{k+1} − 1` with `τ_k = 2^(k−1)`. Round 1 plays uniformly at
//! random. Each later epoch estimates the context distribution from all
//! earlier rounds, derives a concentration slack `ε_k`, and runs a fresh
//! constrained FTRL instance with an epoch learning rate
//! `η_k = sqrt(M ln K / (τ_k K))` against the adjusted constraint:
//!
//! - relaxed mode loosens the level to `max(0, v − ε_k)`, so the estimated
//!   feasible set contains the true one with high probability and the
//!   true-constraint violation per round stays within the concentration
//!   error;
//! - conservative mode tightens to `v + ε_k`, which is sufficient for zero
//!   true violation because `|Σ_j δ(j) p^j(i)| ≤ ‖δ‖₁`; when the tightened
//!   level exceeds `1/K` the epoch falls back to the uniform policy, which
//!   satisfies any admissible level outright.

use rand::Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::learner::{default_eta, FtrlState};
use crate::policy::{feasible_nonempty, ConstraintSpec, ContextDistribution, Policy};
use crate::runner::sample_categorical;
use crate::solver::SolverConfig;

/// How the estimated constraint level is adjusted for estimation error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpochMode {
    Relaxed,
    Conservative,
}

/// Epoch index of a round: `k = floor(log2 t) + 1`.
pub fn epoch_of(t: usize) -> Result<usize> {
    if t == 0 {
        return Err(Error::InvalidParameter("rounds are numbered from 1".into()));
    }
    Ok(usize::BITS as usize - t.leading_zeros() as usize)
}

/// First round of epoch k: `τ_k = 2^(k−1)`.
pub fn epoch_start(k: usize) -> usize {
    1usize << (k - 1)
}

/// Empirical context distribution over rounds `1 .. τ_k − 1`.
pub fn empirical_q(counts: &[u64], tau_k: usize) -> Result<ContextDistribution> {
    if tau_k < 2 {
        return Err(Error::InvalidParameter(
            "epoch 1 has no observations to estimate from".into(),
        ));
    }
    let total: u64 = counts.iter().sum();
    if total != (tau_k - 1) as u64 {
        return Err(Error::InvalidParameter(format!(
            "counts sum to {total}, expected tau_k - 1 = {}",
            tau_k - 1
        )));
    }
    let denom = (tau_k - 1) as f64;
    ContextDistribution::new(counts.iter().map(|&c| c as f64 / denom).collect())
}

/// Concentration slack for epoch k:
/// `ε_k = 4 sqrt(M ln(TM) / (τ_k − 1)) + 2 M ln(TM) / (τ_k − 1)`.
pub fn epsilon_k(tau_k: usize, m: usize, horizon: usize) -> Result<f64> {
    if tau_k < 2 {
        return Err(Error::InvalidParameter(
            "the slack is defined for epochs with at least one observation".into(),
        ));
    }
    if m == 0 || horizon == 0 {
        return Err(Error::InvalidParameter(
            "context count and horizon must be positive".into(),
        ));
    }
    let denom = (tau_k - 1) as f64;
    let log_tm = ((horizon * m) as f64).ln();
    let mf = m as f64;
    Ok(4.0 * (mf * log_tm / denom).sqrt() + 2.0 * mf * log_tm / denom)
}

/// Adjusted constraint level and whether the epoch must fall back to the
/// uniform policy (conservative mode with `v + ε_k > 1/K`).
pub fn effective_constraint(
    mode: EpochMode,
    v: f64,
    eps_k: f64,
    k_arms: usize,
) -> (f64, bool) {
    match mode {
        EpochMode::Relaxed => ((v - eps_k).max(0.0), false),
        EpochMode::Conservative => {
            let v_eff = v + eps_k;
            let fallback = !feasible_nonempty(v_eff, k_arms);
            (v_eff, fallback)
        }
    }
}

/// Snapshot of one epoch's configuration, kept for diagnostics.
#[derive(Debug, Clone)]
pub struct EpochRecord {
    pub k: usize,
    pub tau: usize,
    pub q_hat: Option<ContextDistribution>,
    pub eps: Option<f64>,
    pub v_eff: Option<f64>,
    pub fallback_uniform: bool,
    pub eta: Option<f64>,
}

/// Learner state across epochs.
#[derive(Debug, Clone)]
pub struct EpochState {
    m: usize,
    k_arms: usize,
    v: f64,
    horizon: usize,
    mode: EpochMode,
    t: usize,
    epoch: usize,
    context_counts: Vec<u64>,
    inner: Option<FtrlState>,
    fallback_uniform: bool,
    pending: Option<usize>,
    history: Vec<EpochRecord>,
}

impl EpochState {
    pub fn new(m: usize, k_arms: usize, v: f64, horizon: usize, mode: EpochMode) -> Result<Self> {
        if m == 0 || k_arms == 0 || horizon == 0 {
            return Err(Error::InvalidParameter(
                "dimensions and horizon must be positive".into(),
            ));
        }
        if !(0.0..1.0 / k_arms as f64).contains(&v) {
            return Err(Error::InfeasibleConstraint {
                v_eff: v,
                cap: 1.0 / k_arms as f64,
            });
        }
        Ok(Self {
            m,
            k_arms,
            v,
            horizon,
            mode,
            t: 1,
            epoch: 1,
            context_counts: vec![0; m],
            inner: None,
            fallback_uniform: true, // epoch 1 plays uniformly at random
            pending: None,
            history: vec![EpochRecord {
                k: 1,
                tau: 1,
                q_hat: None,
                eps: None,
                v_eff: None,
                fallback_uniform: true,
                eta: None,
            }],
        })
    }

    pub fn round(&self) -> usize {
        self.t
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn is_fallback(&self) -> bool {
        self.fallback_uniform
    }

    pub fn mode(&self) -> EpochMode {
        self.mode
    }

    /// Per-epoch records appended at every boundary.
    pub fn history(&self) -> &[EpochRecord] {
        &self.history
    }

    fn begin_epoch(&mut self, k: usize) -> Result<()> {
        self.epoch = k;
        let tau = epoch_start(k);
        let q_hat = empirical_q(&self.context_counts, tau)?;
        let eps = epsilon_k(tau, self.m, self.horizon)?;
        let (v_eff, fallback) = effective_constraint(self.mode, self.v, eps, self.k_arms);
        let eta = default_eta(tau, self.m, self.k_arms)?;
        self.fallback_uniform = fallback;
        self.inner = if fallback {
            None
        } else {
            let c = ConstraintSpec::with_effective(q_hat.clone(), self.k_arms, self.v, v_eff)?;
            Some(FtrlState::new(c, SolverConfig::new(eta)?)?)
        };
        self.history.push(EpochRecord {
            k,
            tau,
            q_hat: Some(q_hat),
            eps: Some(eps),
            v_eff: Some(v_eff),
            fallback_uniform: fallback,
            eta: Some(eta),
        });
        Ok(())
    }

    fn sync(&mut self) -> Result<()> {
        let target = epoch_of(self.t)?;
        while self.epoch < target {
            let next = self.epoch + 1;
            self.begin_epoch(next)?;
        }
        Ok(())
    }

    /// The policy for the current round: uniform in epoch 1 and in fallback
    /// epochs, otherwise the inner learner's constrained solve.
    pub fn policy(&mut self) -> Result<Policy> {
        self.sync()?;
        match &mut self.inner {
            Some(inner) if !self.fallback_uniform => inner.policy(),
            _ => Policy::uniform(self.m, self.k_arms),
        }
    }

    pub fn act<R: Rng + ?Sized>(&mut self, j: usize, rng: &mut R) -> Result<usize> {
        if j >= self.m {
            return Err(Error::InvalidParameter(format!(
                "context {j} out of range for {} contexts",
                self.m
            )));
        }
        self.sync()?;
        if let Some(inner) = &mut self.inner {
            return inner.act(j, rng);
        }
        if self.pending.is_some() {
            return Err(Error::Protocol(
                "act called twice without an observe in between".into(),
            ));
        }
        self.pending = Some(j);
        Ok(sample_categorical(
            &vec![1.0 / self.k_arms as f64; self.k_arms],
            rng,
        ))
    }

    pub fn observe(&mut self, j: usize, i: usize, loss: f64) -> Result<()> {
        match &mut self.inner {
            Some(inner) => inner.observe(j, i, loss)?,
            None => match self.pending.take() {
                None => {
                    return Err(Error::Protocol(
                        "observe called before act for this round".into(),
                    ))
                }
                Some(ctx) if ctx != j => {
                    return Err(Error::Protocol(format!(
                        "observe context {j} does not match acted context {ctx}"
                    )))
                }
                Some(_) => {
                    if i >= self.k_arms || !(0.0..=1.0).contains(&loss) {
                        return Err(Error::InvalidParameter(
                            "arm index or loss out of range".into(),
                        ));
                    }
                }
            },
        }
        self.context_counts[j] += 1;
        self.t += 1;
        Ok(())
    }
}

impl crate::runner::Bandit for EpochState {
    fn policy_snapshot(&mut self) -> Result<Policy> {
        self.policy()
    }

    fn select_arm(&mut self, context: usize, rng: &mut dyn rand::RngCore) -> Result<usize> {
        self.act(context, rng)
    }

    fn update(&mut self, context: usize, arm: usize, loss: f64) -> Result<()> {
        self.observe(context, arm, loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{BernoulliEnv, Environment};
    use crate::policy::validate_policy;
    use crate::runner::{replication_rng, run_rounds};

    #[test]
    fn epoch_index_of_rounds() {
        assert_eq!(epoch_of(1).unwrap(), 1);
        assert_eq!(epoch_of(2).unwrap(), 2);
        assert_eq!(epoch_of(3).unwrap(), 2);
        assert_eq!(epoch_of(4).unwrap(), 3);
        assert_eq!(epoch_of(7).unwrap(), 3);
        assert_eq!(epoch_of(1024).unwrap(), 11);
        assert!(epoch_of(0).is_err());
    }

    #[test]
    fn empirical_q_from_counts() {
        let q = empirical_q(&[2, 1], 4).unwrap();
        assert!((q.get(0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((q.get(1) - 1.0 / 3.0).abs() < 1e-15);

        let q = empirical_q(&[0, 3], 4).unwrap();
        assert_eq!(q.get(0), 0.0);
        assert_eq!(q.min_prob(), 0.0);

        let q = empirical_q(&[4, 4], 9).unwrap();
        assert_eq!(q.get(0), 0.5);

        assert!(empirical_q(&[0, 0], 1).is_err());
    }

    #[test]
    fn slack_formula_values() {
        // M = 2, T = 1000, tau_k = 9: 4 sqrt(2 ln 2000 / 8) + 4 ln 2000 / 8
        let eps = epsilon_k(9, 2, 1000).unwrap();
        assert!((eps - 9.315).abs() < 0.01, "eps = {eps}");

        let eps = epsilon_k(32_769, 2, 1000).unwrap();
        assert!((eps - 0.0871).abs() < 2e-4, "eps = {eps}");

        assert!(epsilon_k(1, 2, 1000).is_err());
    }

    #[test]
    fn slack_decreases_toward_zero() {
        let mut prev = f64::INFINITY;
        for k in 2..20 {
            let eps = epsilon_k(1 << (k - 1), 2, 1 << 20).unwrap();
            assert!(eps < prev);
            prev = eps;
        }
        assert!(prev < 0.05);
    }

    #[test]
    fn effective_constraint_modes() {
        let (v_eff, fb) = effective_constraint(EpochMode::Relaxed, 0.3, 0.5, 2);
        assert_eq!(v_eff, 0.0);
        assert!(!fb);

        let (v_eff, fb) = effective_constraint(EpochMode::Conservative, 0.3, 0.05, 2);
        assert!((v_eff - 0.35).abs() < 1e-15);
        assert!(!fb);

        let (v_eff, fb) = effective_constraint(EpochMode::Conservative, 0.45, 0.1, 2);
        assert!((v_eff - 0.55).abs() < 1e-15);
        assert!(fb);
    }

    #[test]
    fn round_one_is_uniform_random() {
        let mut s = EpochState::new(2, 2, 0.3, 64, EpochMode::Relaxed).unwrap();
        let p = s.policy().unwrap();
        assert!(p.as_slice().iter().all(|&x| x == 0.5));
        assert!(s.is_fallback());
        let mut rng = replication_rng(1, 0, 0);
        let arm = s.act(0, &mut rng).unwrap();
        assert!(arm < 2);
    }

    #[test]
    fn epoch_openings_play_uniform() {
        let q = ContextDistribution::new(vec![0.5, 0.5]).unwrap();
        let env = BernoulliEnv::new(vec![vec![0.2, 0.2], vec![0.8, 0.8]], q).unwrap();
        let mut env = Environment::Bernoulli(env);
        let mut s = EpochState::new(2, 2, 0.3, 64, EpochMode::Relaxed).unwrap();
        let mut rng = replication_rng(2, 0, 0);
        for t in 1..=64usize {
            let (j, l) = env.emit(&mut rng).unwrap();
            let p = s.policy().unwrap();
            if t.is_power_of_two() {
                // fresh estimates at the epoch opening: the solve is uniform
                assert!(
                    p.as_slice().iter().all(|&x| (x - 0.5).abs() < 1e-9),
                    "round {t}: {:?}",
                    p.as_slice()
                );
            }
            let a = s.act(j, &mut rng).unwrap();
            s.observe(j, a, l.get(a)).unwrap();
        }
        assert_eq!(s.epoch(), 7);
        assert_eq!(s.history().len(), 7);
    }

    #[test]
    fn trajectory_is_reproducible_and_estimates_concentrate() {
        let run = |seed| {
            let q = ContextDistribution::new(vec![0.5, 0.5]).unwrap();
            let env =
                BernoulliEnv::new(vec![vec![0.6, 0.6], vec![0.8, 0.8]], q.clone()).unwrap();
            let mut env = Environment::Bernoulli(env);
            let mut s = EpochState::new(2, 2, 0.3, 256, EpochMode::Relaxed).unwrap();
            let mut rng = replication_rng(seed, 0, 0);
            let trace = run_rounds(&mut s, &mut env, 256, &mut rng).unwrap();
            let arms: Vec<usize> = trace.rounds().iter().map(|r| r.arm).collect();
            (arms, s)
        };
        let (arms1, _) = run(11);
        let (arms2, s) = run(11);
        assert_eq!(arms1, arms2);

        // every epoch's estimate within its slack of the true q
        let q = ContextDistribution::new(vec![0.5, 0.5]).unwrap();
        for rec in s.history().iter().filter(|r| r.k >= 2) {
            let dev = rec.q_hat.as_ref().unwrap().l1_distance(&q).unwrap();
            assert!(dev <= rec.eps.unwrap());
        }
    }

    #[test]
    fn estimates_concentrate_across_seeds() {
        let q = ContextDistribution::new(vec![0.5, 0.5]).unwrap();
        let mut ok = 0;
        let total = 100;
        for seed in 0..total {
            let env =
                BernoulliEnv::new(vec![vec![0.6, 0.6], vec![0.8, 0.8]], q.clone()).unwrap();
            let mut env = Environment::Bernoulli(env);
            let mut s = EpochState::new(2, 2, 0.3, 256, EpochMode::Relaxed).unwrap();
            let mut rng = replication_rng(seed, 0, 0);
            run_rounds(&mut s, &mut env, 256, &mut rng).unwrap();
            let all_within = s
                .history()
                .iter()
                .filter(|r| r.k >= 2)
                .all(|r| r.q_hat.as_ref().unwrap().l1_distance(&q).unwrap() <= r.eps.unwrap());
            if all_within {
                ok += 1;
            }
        }
        assert!(ok >= 99, "only {ok}/{total} seeds concentrated");
    }

    #[test]
    fn relaxed_set_contains_feasible_policies_under_concentration() {
        // With q_hat exactly at L1 distance eps from q, every policy feasible
        // for (q, v) also satisfies the relaxed constraint (q_hat, v - eps).
        let q = ContextDistribution::new(vec![0.6, 0.4]).unwrap();
        let v = 0.3;
        let eps = 0.1;
        let q_hat = ContextDistribution::new(vec![0.65, 0.35]).unwrap();
        assert!((q.l1_distance(&q_hat).unwrap() - eps).abs() < 1e-12);
        let c_true = ConstraintSpec::new(q.clone(), 2, v).unwrap();
        let c_relaxed =
            ConstraintSpec::with_effective(q_hat, 2, v, v - eps).unwrap();
        let mut rng = replication_rng(13, 0, 0);
        for _ in 0..200 {
            // random feasible member of the true set: mix a random policy
            // toward uniform until feasible
            let mut rows: Vec<Vec<f64>> = (0..2)
                .map(|_| {
                    let a: f64 = rng.random();
                    vec![a, 1.0 - a]
                })
                .collect();
            loop {
                let p = Policy::from_rows(&rows).unwrap();
                if validate_policy(&p, &c_true, 1e-12).unwrap().feasible {
                    break;
                }
                for row in rows.iter_mut() {
                    for x in row.iter_mut() {
                        *x = 0.9 * *x + 0.1 * 0.5;
                    }
                }
            }
            let p = Policy::from_rows(&rows).unwrap();
            let rep = validate_policy(&p, &c_relaxed, 1e-12).unwrap();
            assert!(rep.feasible, "true-feasible policy left the relaxed set");
        }
    }

    #[test]
    fn conservative_set_is_sound_within_the_l1_ball() {
        // Any policy meeting (q_hat, v + eps) meets (q', v) for every q' with
        // ||q' - q_hat||_1 <= eps, including adversarial corners.
        let q_hat = ContextDistribution::new(vec![0.5, 0.5]).unwrap();
        let v = 0.2;
        let eps = 0.08;
        let c_tight =
            ConstraintSpec::with_effective(q_hat.clone(), 2, v, v + eps).unwrap();
        let mut rng = replication_rng(17, 0, 0);
        for _ in 0..200 {
            let mut rows: Vec<Vec<f64>> = (0..2)
                .map(|_| {
                    let a: f64 = rng.random();
                    vec![a, 1.0 - a]
                })
                .collect();
            loop {
                let p = Policy::from_rows(&rows).unwrap();
                if validate_policy(&p, &c_tight, 1e-12).unwrap().feasible {
                    break;
                }
                for row in rows.iter_mut() {
                    for x in row.iter_mut() {
                        *x = 0.9 * *x + 0.1 * 0.5;
                    }
                }
            }
            let p = Policy::from_rows(&rows).unwrap();
            // adversarial corners of the L1 ball move eps/2 of mass
            for (a, b) in [(0usize, 1usize), (1, 0)] {
                let mut qv = vec![q_hat.get(0), q_hat.get(1)];
                qv[a] += eps / 2.0;
                qv[b] -= eps / 2.0;
                let q_adv = ContextDistribution::new(qv).unwrap();
                let c_true = ConstraintSpec::new(q_adv, 2, v).unwrap();
                let rep = validate_policy(&p, &c_true, 1e-12).unwrap();
                assert!(rep.feasible, "tightened policy violated a ball member");
            }
        }
    }
}
