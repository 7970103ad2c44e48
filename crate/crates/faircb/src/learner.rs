//! FTRL learner with a known context distribution.
//!
//! The state keeps cumulative importance-weighted loss estimates per
//! (context, arm) cell. At each round the policy is the constrained solve of
//! those estimates, recomputed lazily after every update and warm-started
//! from the previous round's dual multipliers. Arms are sampled from the
//! cached policy, and the estimator divides by exactly the probability that
//! was sampled from — the state machine enforces act-then-observe ordering
//! per round to keep that contract.

use rand::Rng;

use crate::error::{Error, Result};
use crate::policy::{ConstraintSpec, Policy};
use crate::runner::sample_categorical;
use crate::solver::{solve_ftrl_step_warm, CumulativeLoss, DualState, SolverConfig};

/// The learning rate that balances the regularizer against a horizon of T
/// rounds: `sqrt(m ln k / (T k))`.
pub fn default_eta(horizon: usize, m: usize, k: usize) -> Result<f64> {
    if horizon == 0 || m == 0 {
        return Err(Error::InvalidParameter(
            "horizon and context count must be positive".into(),
        ));
    }
    if k < 2 {
        return Err(Error::InvalidParameter(
            "default eta needs at least two arms (ln K = 0 otherwise)".into(),
        ));
    }
    Ok((m as f64 * (k as f64).ln() / (horizon as f64 * k as f64)).sqrt())
}

/// Learner state: estimates, constraint, solver settings, and the cached
/// per-round solution.
#[derive(Debug, Clone)]
pub struct FtrlState {
    g: CumulativeLoss,
    c: ConstraintSpec,
    cfg: SolverConfig,
    t: usize,
    cached: Option<(Policy, DualState)>,
    warm_lambda: Option<Vec<f64>>,
    pending: Option<usize>,
}

impl FtrlState {
    pub fn new(c: ConstraintSpec, cfg: SolverConfig) -> Result<Self> {
        let g = CumulativeLoss::zeros(c.num_contexts(), c.k_arms())?;
        Ok(Self {
            g,
            c,
            cfg,
            t: 1,
            cached: None,
            warm_lambda: None,
            pending: None,
        })
    }

    pub fn round(&self) -> usize {
        self.t
    }

    pub fn constraint(&self) -> &ConstraintSpec {
        &self.c
    }

    pub fn cumulative(&self) -> &CumulativeLoss {
        &self.g
    }

    pub fn num_contexts(&self) -> usize {
        self.c.num_contexts()
    }

    pub fn num_arms(&self) -> usize {
        self.c.k_arms()
    }

    fn ensure_solved(&mut self) -> Result<()> {
        if self.cached.is_none() {
            let solved =
                solve_ftrl_step_warm(&self.g, &self.c, &self.cfg, self.warm_lambda.as_deref())?;
            self.cached = Some(solved);
        }
        Ok(())
    }

    /// The policy for the current round. Deterministic given the state and
    /// does not mutate the estimates.
    pub fn policy(&mut self) -> Result<Policy> {
        self.ensure_solved()?;
        Ok(self.cached.as_ref().unwrap().0.clone())
    }

    /// Dual certificate of the current round's solve.
    pub fn dual(&mut self) -> Result<DualState> {
        self.ensure_solved()?;
        Ok(self.cached.as_ref().unwrap().1.clone())
    }

    /// Samples an arm from row `j` of the current policy.
    pub fn act<R: Rng + ?Sized>(&mut self, j: usize, rng: &mut R) -> Result<usize> {
        if j >= self.num_contexts() {
            return Err(Error::InvalidParameter(format!(
                "context {j} out of range for {} contexts",
                self.num_contexts()
            )));
        }
        if self.pending.is_some() {
            return Err(Error::Protocol(
                "act called twice without an observe in between".into(),
            ));
        }
        self.ensure_solved()?;
        let arm = sample_categorical(self.cached.as_ref().unwrap().0.row(j), rng);
        self.pending = Some(j);
        Ok(arm)
    }

    /// Applies the importance-weighted estimator for the realized loss:
    /// `g[j, i] += loss / p't round's probability of arm i in context j`.
    pub fn observe(&mut self, j: usize, i: usize, loss: f64) -> Result<()> {
        match self.pending {
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
            Some(_) => {}
        }
        if i >= self.num_arms() {
            return Err(Error::InvalidParameter(format!(
                "arm {i} out of range for {} arms",
                self.num_arms()
            )));
        }
        if !(0.0..=1.0).contains(&loss) {
            return Err(Error::InvalidParameter(format!(
                "loss {loss} outside [0, 1]"
            )));
        }
        let (policy, dual) = self.cached.as_ref().expect("act caches the solve");
        let p = policy.get(j, i);
        if p <= 0.0 {
            return Err(Error::Protocol(
                "observed arm has zero sampling probability".into(),
            ));
        }
        let warm = dual.lambda.clone();
        self.g.add(j, i, loss / p)?;
        self.t += 1;
        self.warm_lambda = Some(warm);
        self.cached = None;
        self.pending = None;
        Ok(())
    }
}

impl crate::runner::Bandit for FtrlState {
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
    use crate::policy::ContextDistribution;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(q: Vec<f64>, k: usize, v: f64) -> ConstraintSpec {
        ConstraintSpec::new(ContextDistribution::new(q).unwrap(), k, v).unwrap()
    }

    #[test]
    fn default_eta_matches_formula() {
        let eta = default_eta(2000, 2, 2).unwrap();
        assert!((eta - 0.018616).abs() < 1e-6);
        let eta1 = default_eta(1, 1, 2).unwrap();
        assert!((eta1 - 0.58871).abs() < 1e-5);
    }

    #[test]
    fn default_eta_halves_when_horizon_quadruples() {
        let e1 = default_eta(500, 2, 3).unwrap();
        let e2 = default_eta(2000, 2, 3).unwrap();
        assert!((e1 / e2 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn default_eta_rejects_single_arm() {
        assert!(default_eta(100, 2, 1).is_err());
    }

    #[test]
    fn fresh_state_plays_uniform() {
        let mut s = FtrlState::new(spec(vec![0.5, 0.5], 2, 0.3), SolverConfig::new(0.5).unwrap())
            .unwrap();
        let p = s.policy().unwrap();
        assert!(p.as_slice().iter().all(|&x| (x - 0.5).abs() < 1e-9));
    }

    #[test]
    fn zero_fairness_state_is_rowwise_softmax() {
        let mut s =
            FtrlState::new(spec(vec![1.0], 2, 0.0), SolverConfig::new(1.0).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let j = 0;
        let arm = s.act(j, &mut rng).unwrap();
        s.observe(j, arm, 1.0).unwrap();
        let p = s.policy().unwrap();
        // manual softmax of -eta*g
        let g = s.cumulative().clone();
        let e0 = (-g.get(0, 0)).exp();
        let e1 = (-g.get(0, 1)).exp();
        assert!((p.get(0, 0) - e0 / (e0 + e1)).abs() < 1e-12);
    }

    #[test]
    fn observe_applies_importance_weighting() {
        // Force a near-deterministic sampling row, then check the increment.
        let mut s = FtrlState::new(spec(vec![1.0], 2, 0.4), SolverConfig::new(1.0).unwrap())
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let arm = s.act(0, &mut rng).unwrap();
        s.observe(0, arm, 0.8).unwrap();
        // g[0, arm] must be 0.8 / 0.5 = 1.6 (fresh state is uniform)
        assert!((s.cumulative().get(0, arm) - 1.6).abs() < 1e-9);
        let other = 1 - arm;
        assert_eq!(s.cumulative().get(0, other), 0.0);
        assert_eq!(s.round(), 2);
    }

    #[test]
    fn zero_loss_advances_round_without_changing_estimates() {
        let mut s =
            FtrlState::new(spec(vec![1.0], 2, 0.1), SolverConfig::new(1.0).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let arm = s.act(0, &mut rng).unwrap();
        s.observe(0, arm, 0.0).unwrap();
        assert_eq!(s.cumulative().get(0, 0), 0.0);
        assert_eq!(s.cumulative().get(0, 1), 0.0);
        assert_eq!(s.round(), 2);
    }

    #[test]
    fn act_twice_without_observe_is_a_protocol_error() {
        let mut s =
            FtrlState::new(spec(vec![1.0], 2, 0.1), SolverConfig::new(1.0).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        s.act(0, &mut rng).unwrap();
        assert!(matches!(s.act(0, &mut rng), Err(Error::Protocol(_))));
    }

    #[test]
    fn observe_without_act_is_a_protocol_error() {
        let mut s =
            FtrlState::new(spec(vec![1.0], 2, 0.1), SolverConfig::new(1.0).unwrap()).unwrap();
        assert!(matches!(s.observe(0, 0, 0.5), Err(Error::Protocol(_))));
    }

    #[test]
    fn sampling_frequency_matches_the_row() {
        let mut s =
            FtrlState::new(spec(vec![1.0], 2, 0.3), SolverConfig::new(1.0).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut count0 = 0usize;
        let n = 100_000;
        for _ in 0..n {
            let arm = s.act(0, &mut rng).unwrap();
            if arm == 0 {
                count0 += 1;
            }
            // roll back the round state without updating estimates
            s.observe(0, arm, 0.0).unwrap();
        }
        let freq = count0 as f64 / n as f64;
        // fresh estimates stay zero, so the policy stays uniform
        assert!((freq - 0.5).abs() < 0.005, "freq {freq}");
    }

    #[test]
    fn fixed_seed_reproduces_the_arm_sequence() {
        let run = || {
            let mut s = FtrlState::new(
                spec(vec![0.5, 0.5], 2, 0.25),
                SolverConfig::new(0.3).unwrap(),
            )
            .unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(23);
            let mut arms = Vec::new();
            for t in 0..100 {
                let j = t % 2;
                let a = s.act(j, &mut rng).unwrap();
                arms.push(a);
                s.observe(j, a, if a == 0 { 0.7 } else { 0.2 }).unwrap();
            }
            arms
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn fairness_holds_at_every_round() {
        let q = ContextDistribution::new(vec![0.5, 0.5]).unwrap();
        let v = 0.45;
        let mut s = FtrlState::new(
            spec(vec![0.5, 0.5], 2, v),
            SolverConfig::new(0.05).unwrap(),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for t in 0..300 {
            let p = s.policy().unwrap();
            let min_marg = p.min_marginal(&q).unwrap();
            assert!(
                min_marg >= v - 1e-7,
                "round {t}: min marginal {min_marg} below v {v}"
            );
            let j = t % 2;
            let a = s.act(j, &mut rng).unwrap();
            // adversarially skewed losses to push against the constraint
            let loss = if a == 1 { 1.0 } else { 0.0 };
            s.observe(j, a, loss).unwrap();
        }
    }
}
