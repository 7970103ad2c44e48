//! Comparison algorithms: per-context Exp3 without a fairness constraint,
//! the non-contextual FTRL learner, and a rate-constrained UCB.

use rand::Rng;

use crate::error::{Error, Result};
use crate::learner::FtrlState;
use crate::policy::{ConstraintSpec, ContextDistribution, Policy};
use crate::runner::sample_categorical;
use crate::solver::{softmax_into, SolverConfig};

// ── Per-context Exp3 ────────────────────────────────────────────────────

/// One independent Exp3 instance per context: rowwise softmax of the
/// negative scaled loss estimates, no joint constraint and no dual solve.
/// With a shared rng this is arm-for-arm identical to the constrained
/// learner run at `v = 0`.
#[derive(Debug, Clone)]
pub struct Exp3PerContext {
    m: usize,
    k: usize,
    eta: f64,
    g: Vec<f64>,
    pending: Option<(usize, Vec<f64>)>,
}

impl Exp3PerContext {
    pub fn new(m: usize, k: usize, eta: f64) -> Result<Self> {
        if m == 0 || k == 0 {
            return Err(Error::InvalidParameter(
                "Exp3 dimensions must be positive".into(),
            ));
        }
        if !eta.is_finite() || eta <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "learning rate eta = {eta} must be positive"
            )));
        }
        Ok(Self {
            m,
            k,
            eta,
            g: vec![0.0; m * k],
            pending: None,
        })
    }

    fn row_probs(&self, j: usize) -> Vec<f64> {
        let scores: Vec<f64> = (0..self.k)
            .map(|i| -self.eta * self.g[j * self.k + i])
            .collect();
        let mut out = vec![0.0; self.k];
        softmax_into(&scores, &mut out);
        out
    }

    pub fn probabilities(&self) -> Result<Policy> {
        let rows: Vec<Vec<f64>> = (0..self.m).map(|j| self.row_probs(j)).collect();
        Policy::from_rows(&rows)
    }

    pub fn select<R: Rng + ?Sized>(&mut self, j: usize, rng: &mut R) -> Result<usize> {
        if j >= self.m {
            return Err(Error::InvalidParameter(format!(
                "context {j} out of range for {} contexts",
                self.m
            )));
        }
        if self.pending.is_some() {
            return Err(Error::Protocol(
                "select called twice without an update in between".into(),
            ));
        }
        let row = self.row_probs(j);
        let arm = sample_categorical(&row, rng);
        self.pending = Some((j, row));
        Ok(arm)
    }

    pub fn update(&mut self, j: usize, i: usize, loss: f64) -> Result<()> {
        let (ctx, row) = self
            .pending
            .take()
            .ok_or_else(|| Error::Protocol("update called before select".into()))?;
        if ctx != j {
            return Err(Error::Protocol(format!(
                "update context {j} does not match selected context {ctx}"
            )));
        }
        if i >= self.k || !(0.0..=1.0).contains(&loss) {
            return Err(Error::InvalidParameter(
                "arm index or loss out of range".into(),
            ));
        }
        let p = row[i];
        if p <= 0.0 {
            return Err(Error::Protocol(
                "observed arm has zero sampling probability".into(),
            ));
        }
        self.g[j * self.k + i] += loss / p;
        Ok(())
    }
}

impl crate::runner::Bandit for Exp3PerContext {
    fn policy_snapshot(&mut self) -> Result<Policy> {
        self.probabilities()
    }

    fn select_arm(&mut self, context: usize, rng: &mut dyn rand::RngCore) -> Result<usize> {
        self.select(context, rng)
    }

    fn update(&mut self, context: usize, arm: usize, loss: f64) -> Result<()> {
        Exp3PerContext::update(self, context, arm, loss)
    }
}

// ── Non-contextual FTRL ─────────────────────────────────────────────────

/// The constrained learner run with a single context: the fairness
/// constraint degenerates to `p(i) ≥ v` directly. Environment contexts are
/// ignored and the snapshot broadcasts the single row.
#[derive(Debug, Clone)]
pub struct NoncontextualFtrl {
    inner: FtrlState,
    m_env: usize,
}

impl NoncontextualFtrl {
    pub fn new(m_env: usize, k: usize, v: f64, cfg: SolverConfig) -> Result<Self> {
        let q = ContextDistribution::new(vec![1.0])?;
        let c = ConstraintSpec::new(q, k, v)?;
        Ok(Self {
            inner: FtrlState::new(c, cfg)?,
            m_env: m_env.max(1),
        })
    }

    pub fn inner(&self) -> &FtrlState {
        &self.inner
    }

    pub fn select<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<usize> {
        self.inner.act(0, rng)
    }

    pub fn observe(&mut self, arm: usize, loss: f64) -> Result<()> {
        self.inner.observe(0, arm, loss)
    }
}

impl crate::runner::Bandit for NoncontextualFtrl {
    fn policy_snapshot(&mut self) -> Result<Policy> {
        let p = self.inner.policy()?;
        let rows: Vec<Vec<f64>> = (0..self.m_env).map(|_| p.row(0).to_vec()).collect();
        Policy::from_rows(&rows)
    }

    fn select_arm(&mut self, _context: usize, rng: &mut dyn rand::RngCore) -> Result<usize> {
        self.select(rng)
    }

    fn update(&mut self, _context: usize, arm: usize, loss: f64) -> Result<()> {
        self.observe(arm, loss)
    }
}

// ── Rate-constrained UCB ────────────────────────────────────────────────

/// UCB1 on rewards (reward = 1 − loss) mixed with a uniform draw: with
/// probability `K·v` the arm is chosen uniformly at random, otherwise by the
/// highest index `r̄_i + sqrt(2 ln t / n_i)` (ties to the lowest index).
/// The mixture makes the per-round marginal pull probability of every arm
/// at least `v` by construction, after one initial pull per arm.
#[derive(Debug, Clone)]
pub struct UcbState {
    k: usize,
    v: f64,
    counts: Vec<u64>,
    mean_reward: Vec<f64>,
    t: usize,
    m_env: usize,
}

impl UcbState {
    pub fn new(k: usize, v: f64, m_env: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("need at least one arm".into()));
        }
        if !(0.0..=1.0 / k as f64).contains(&v) {
            return Err(Error::InvalidParameter(format!(
                "fairness rate {v} outside [0, 1/K]"
            )));
        }
        Ok(Self {
            k,
            v,
            counts: vec![0; k],
            mean_reward: vec![0.0; k],
            t: 0,
            m_env: m_env.max(1),
        })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn mean_rewards(&self) -> &[f64] {
        &self.mean_reward
    }

    fn exploit_arm(&self) -> usize {
        let t = self.t.max(1) as f64;
        let mut best = 0usize;
        let mut best_score = f64::NEG_INFINITY;
        for i in 0..self.k {
            let n = self.counts[i] as f64;
            let score = self.mean_reward[i] + (2.0 * t.ln() / n).sqrt();
            if score > best_score {
                best_score = score;
                best = i;
            }
        }
        best
    }

    /// The action distribution of the current round.
    pub fn policy_row(&self) -> Vec<f64> {
        if self.t < self.k {
            let mut row = vec![0.0; self.k];
            row[self.t] = 1.0;
            return row;
        }
        let mut row = vec![self.v; self.k];
        row[self.exploit_arm()] += 1.0 - self.k as f64 * self.v;
        row
    }

    pub fn select<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        if self.t < self.k {
            return self.t;
        }
        let u: f64 = rng.random();
        if u < self.k as f64 * self.v {
            sample_categorical(&vec![1.0 / self.k as f64; self.k], rng)
        } else {
            self.exploit_arm()
        }
    }

    pub fn update(&mut self, arm: usize, loss: f64) -> Result<()> {
        if arm >= self.k || !(0.0..=1.0).contains(&loss) {
            return Err(Error::InvalidParameter(
                "arm index or loss out of range".into(),
            ));
        }
        let reward = 1.0 - loss;
        self.counts[arm] += 1;
        let n = self.counts[arm] as f64;
        self.mean_reward[arm] += (reward - self.mean_reward[arm]) / n;
        self.t += 1;
        Ok(())
    }
}

impl crate::runner::Bandit for UcbState {
    fn policy_snapshot(&mut self) -> Result<Policy> {
        let row = self.policy_row();
        let rows: Vec<Vec<f64>> = (0..self.m_env).map(|_| row.clone()).collect();
        Policy::from_rows(&rows)
    }

    fn select_arm(&mut self, _context: usize, rng: &mut dyn rand::RngCore) -> Result<usize> {
        Ok(self.select(rng))
    }

    fn update(&mut self, _context: usize, arm: usize, loss: f64) -> Result<()> {
        UcbState::update(self, arm, loss)
    }
}
