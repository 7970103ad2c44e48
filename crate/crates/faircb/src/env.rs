//! Loss-generating processes: i.i.d. contextual Bernoulli losses and an
//! adaptive switching adversary.
//!
//! The round protocol is emit-then-feedback: the environment commits the
//! context and the full loss vector before the learner acts, and only sees
//! the realized loss afterwards. The switching adversary flips its loss
//! means every time the learner's realized loss is exactly zero, which makes
//! the loss sequence depend on the whole interaction history.

use rand::Rng;

use crate::error::{Error, Result};
use crate::policy::{ContextDistribution, LossVector};
use crate::runner::sample_categorical;

// ── Bernoulli environment ───────────────────────────────────────────────

/// Contexts drawn i.i.d. from `q`; per-arm losses Bernoulli with mean
/// `mu[arm][context]`.
#[derive(Debug, Clone)]
pub struct BernoulliEnv {
    mu: Vec<Vec<f64>>, // K rows of M entries
    q: ContextDistribution,
}

impl BernoulliEnv {
    pub fn new(mu: Vec<Vec<f64>>, q: ContextDistribution) -> Result<Self> {
        let k = mu.len();
        if k == 0 {
            return Err(Error::InvalidParameter(
                "mean matrix must have at least one arm row".into(),
            ));
        }
        let m = q.len();
        if mu.iter().any(|row| row.len() != m) {
            return Err(Error::DimensionMismatch(format!(
                "mean matrix rows must have {m} context entries"
            )));
        }
        if mu
            .iter()
            .flatten()
            .any(|&x| !(0.0..=1.0).contains(&x))
        {
            return Err(Error::InvalidParameter(
                "Bernoulli means must lie in [0, 1]".into(),
            ));
        }
        Ok(Self { mu, q })
    }

    pub fn num_contexts(&self) -> usize {
        self.q.len()
    }

    pub fn num_arms(&self) -> usize {
        self.mu.len()
    }

    pub fn q(&self) -> &ContextDistribution {
        &self.q
    }

    pub fn emit<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, LossVector) {
        let j = sample_categorical(self.q.as_slice(), rng);
        let values: Vec<f64> = (0..self.num_arms())
            .map(|i| {
                if rng.random::<f64>() < self.mu[i][j] {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        (j, LossVector::new(values).expect("Bernoulli losses are 0/1"))
    }
}

// ── Switching adversary ─────────────────────────────────────────────────

/// Single-context adversary that alternates between two Bernoulli mean
/// vectors, flipping state whenever the learner's realized loss is 0.
#[derive(Debug, Clone)]
pub struct SwitchingAdversary {
    means_a: Vec<f64>,
    means_b: Vec<f64>,
    in_b: bool,
    awaiting_feedback: bool,
}

impl SwitchingAdversary {
    pub fn new(means_a: Vec<f64>, means_b: Vec<f64>) -> Result<Self> {
        if means_a.is_empty() || means_a.len() != means_b.len() {
            return Err(Error::DimensionMismatch(
                "adversary mean vectors must be nonempty and equally long".into(),
            ));
        }
        if means_a
            .iter()
            .chain(&means_b)
            .any(|&x| !(0.0..=1.0).contains(&x))
        {
            return Err(Error::InvalidParameter(
                "adversary means must lie in [0, 1]".into(),
            ));
        }
        Ok(Self {
            means_a,
            means_b,
            in_b: false,
            awaiting_feedback: false,
        })
    }

    /// The two-arm setup with means (0.1, 0.9) and (0.9, 0.1).
    pub fn default_two_arm() -> Self {
        Self::new(vec![0.1, 0.9], vec![0.9, 0.1]).expect("valid defaults")
    }

    pub fn num_arms(&self) -> usize {
        self.means_a.len()
    }

    /// True when the adversary is in its second state.
    pub fn in_second_state(&self) -> bool {
        self.in_b
    }

    pub fn emit<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<LossVector> {
        if self.awaiting_feedback {
            return Err(Error::Protocol(
                "emit called twice without feedback in between".into(),
            ));
        }
        let means = if self.in_b { &self.means_b } else { &self.means_a };
        let values: Vec<f64> = means
            .iter()
            .map(|&mu| if rng.random::<f64>() < mu { 1.0 } else { 0.0 })
            .collect();
        self.awaiting_feedback = true;
        Ok(LossVector::new(values).expect("Bernoulli losses are 0/1"))
    }

    /// Reports the realized loss; a loss of exactly 0 flips the state for
    /// the next round.
    pub fn feedback(&mut self, realized_loss: f64) -> Result<()> {
        if !self.awaiting_feedback {
            return Err(Error::Protocol("feedback called before emit".into()));
        }
        if realized_loss == 0.0 {
            self.in_b = !self.in_b;
        }
        self.awaiting_feedback = false;
        Ok(())
    }
}

// ── Unified environment ─────────────────────────────────────────────────

/// Either loss process behind one emit/feedback interface.
#[derive(Debug, Clone)]
pub enum Environment {
    Bernoulli(BernoulliEnv),
    Switching(SwitchingAdversary),
}

impl Environment {
    pub fn num_contexts(&self) -> usize {
        match self {
            Environment::Bernoulli(e) => e.num_contexts(),
            Environment::Switching(_) => 1,
        }
    }

    pub fn num_arms(&self) -> usize {
        match self {
            Environment::Bernoulli(e) => e.num_arms(),
            Environment::Switching(e) => e.num_arms(),
        }
    }

    /// The true context distribution (a point mass for the adversary).
    pub fn context_distribution(&self) -> ContextDistribution {
        match self {
            Environment::Bernoulli(e) => e.q().clone(),
            Environment::Switching(_) => {
                ContextDistribution::new(vec![1.0]).expect("point mass")
            }
        }
    }

    pub fn emit<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(usize, LossVector)> {
        match self {
            Environment::Bernoulli(e) => Ok(e.emit(rng)),
            Environment::Switching(e) => Ok((0, e.emit(rng)?)),
        }
    }

    pub fn feedback(&mut self, realized_loss: f64) -> Result<()> {
        match self {
            Environment::Bernoulli(_) => Ok(()),
            Environment::Switching(e) => e.feedback(realized_loss),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn all_one_means_emit_all_one_losses() {
        let q = ContextDistribution::new(vec![0.5, 0.5]).unwrap();
        let env = BernoulliEnv::new(vec![vec![1.0, 1.0], vec![1.0, 1.0]], q).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let (_, l) = env.emit(&mut rng);
            assert_eq!(l.as_slice(), &[1.0, 1.0]);
        }
    }

    #[test]
    fn point_mass_context_always_emits_that_context() {
        let q = ContextDistribution::new(vec![1.0, 0.0]).unwrap();
        let env = BernoulliEnv::new(vec![vec![0.5, 0.5]], q).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let (j, _) = env.emit(&mut rng);
            assert_eq!(j, 0);
        }
    }

    #[test]
    fn empirical_loss_mean_close_to_mu() {
        let q = ContextDistribution::new(vec![1.0]).unwrap();
        let env = BernoulliEnv::new(vec![vec![0.6]], q).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let mut total = 0.0;
        for _ in 0..n {
            let (_, l) = env.emit(&mut rng);
            total += l.get(0);
        }
        let mean = total / n as f64;
        // 3 sigma for a Bernoulli(0.6) mean over 1e5 draws
        assert!((mean - 0.6).abs() < 3.0 * (0.6f64 * 0.4 / n as f64).sqrt() * 1.5);
    }

    #[test]
    fn context_frequency_converges_to_q() {
        let q = ContextDistribution::new(vec![0.3, 0.7]).unwrap();
        let env = BernoulliEnv::new(vec![vec![0.5, 0.5]], q).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 100_000;
        let mut c0 = 0usize;
        for _ in 0..n {
            let (j, _) = env.emit(&mut rng);
            if j == 0 {
                c0 += 1;
            }
        }
        let f0 = c0 as f64 / n as f64;
        assert!((f0 - 0.3).abs() < 3.0 * (0.3f64 * 0.7 / n as f64).sqrt() * 1.5);
    }

    #[test]
    fn adversary_flips_on_zero_loss_only() {
        let mut adv = SwitchingAdversary::default_two_arm();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(!adv.in_second_state());
        adv.emit(&mut rng).unwrap();
        adv.feedback(0.0).unwrap();
        assert!(adv.in_second_state());
        adv.emit(&mut rng).unwrap();
        adv.feedback(1.0).unwrap();
        assert!(adv.in_second_state());
        adv.emit(&mut rng).unwrap();
        adv.feedback(0.0).unwrap();
        assert!(!adv.in_second_state());
    }

    #[test]
    fn adversary_enforces_emit_feedback_ordering() {
        let mut adv = SwitchingAdversary::default_two_arm();
        assert!(matches!(adv.feedback(1.0), Err(Error::Protocol(_))));
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        adv.emit(&mut rng).unwrap();
        assert!(matches!(adv.emit(&mut rng), Err(Error::Protocol(_))));
    }

    #[test]
    fn adversary_state_sequence_is_reproducible() {
        let run = || {
            let mut adv = SwitchingAdversary::default_two_arm();
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let mut states = Vec::new();
            for t in 0..5 {
                let l = adv.emit(&mut rng).unwrap();
                adv.feedback(l.get(t % 2)).unwrap();
                states.push(adv.in_second_state());
            }
            states
        };
        assert_eq!(run(), run());
    }
}
