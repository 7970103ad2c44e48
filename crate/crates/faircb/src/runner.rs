//! Round-level simulation driver shared by the harness, the examples, and
//! the test suites.
//!
//! Every replication owns one ChaCha stream derived from (base seed,
//! fairness-grid index, replication index), so results are identical across
//! runs and across worker counts, and shortening the replication count
//! leaves the remaining rows unchanged.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::Environment;
use crate::error::Result;
use crate::policy::{Policy, Trace};

/// Anything that can play the bandit protocol: report the policy it will
/// sample from this round, sample an arm, and absorb the realized loss.
pub trait Bandit {
    /// The per-context action distributions for the current round, with the
    /// same dimensions as the environment (single-context algorithms
    /// broadcast their row).
    fn policy_snapshot(&mut self) -> Result<Policy>;

    fn select_arm(&mut self, context: usize, rng: &mut dyn RngCore) -> Result<usize>;

    fn update(&mut self, context: usize, arm: usize, loss: f64) -> Result<()>;
}

/// Deterministic per-replication stream: the stream id packs the grid index
/// into the high half and the replication index into the low half.
pub fn replication_rng(base_seed: u64, v_idx: u32, rep: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(((v_idx as u64) << 32) | rep as u64);
    rng
}

/// Inverse-CDF sampling from a probability row with a single uniform draw.
pub(crate) fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        cum += p;
        if u < cum {
            return i;
        }
    }
    probs.len() - 1
}

/// Runs the full protocol for `horizon` rounds: the environment commits the
/// context and loss vector, the agent's policy is snapshotted, an arm is
/// sampled, the agent sees only the realized entry, and the environment
/// receives the realized loss afterwards.
pub fn run_rounds(
    agent: &mut dyn Bandit,
    env: &mut Environment,
    horizon: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Trace> {
    let mut trace = Trace::new(env.num_contexts(), env.num_arms());
    for _ in 0..horizon {
        let (context, losses) = env.emit(rng)?;
        let policy = agent.policy_snapshot()?;
        let arm = agent.select_arm(context, rng)?;
        let realized = losses.get(arm);
        agent.update(context, arm, realized)?;
        env.feedback(realized)?;
        trace.push(context, policy, arm, losses)?;
    }
    Ok(trace)
}
