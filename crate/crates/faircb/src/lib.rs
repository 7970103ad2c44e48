//! Fairness-constrained contextual bandits.
//!
//! An adversarial contextual bandit learner whose per-round policy is the
//! minimizer of cumulative importance-weighted loss estimates plus a scaled
//! negative-entropy regularizer, taken over the product of per-context
//! simplices intersected with per-arm marginal pull-rate constraints. The
//! crate provides:
//!
//! - [`solver`]: the constrained entropic solve (dual projected gradient
//!   ascent with a closed-form softmax inner step and a duality-gap
//!   certificate), a grid-search oracle, and the hindsight optimum;
//! - [`learner`]: the round-by-round learner for a known context
//!   distribution;
//! - [`epoch`]: the doubling-epoch variant for unknown context
//!   distributions, in relaxed and conservative modes;
//! - [`baselines`]: per-context Exp3, non-contextual FTRL, and a
//!   rate-constrained UCB;
//! - [`env`]: Bernoulli and switching-adversary loss processes;
//! - [`metrics`]: performance, pseudo-regret, violation, disparity, OLS;
//! - [`experiment`]: TOML-configured, seeded, parallel replication runs
//!   with CSV output;
//! - [`runner`]: the shared round-level protocol driver.
//!
//! Start with the `examples/` directory: each file exercises one capability
//! end to end.

pub mod baselines;
pub mod env;
pub mod epoch;
pub mod error;
pub mod experiment;
pub mod learner;
pub mod metrics;
pub mod policy;
pub mod runner;
pub mod solver;

pub use baselines::{Exp3PerContext, NoncontextualFtrl, UcbState};
pub use env::{BernoulliEnv, Environment, SwitchingAdversary};
pub use epoch::{EpochMode, EpochState};
pub use error::{Error, Result};
pub use experiment::{allocate_window, run_experiment, run_one, ExperimentConfig, RunOptions};
pub use learner::{default_eta, FtrlState};
pub use metrics::RunSummary;
pub use policy::{
    validate_policy, ConstraintSpec, ContextDistribution, LossVector, Policy, Trace,
};
pub use runner::{replication_rng, run_rounds, Bandit};
pub use solver::{
    best_fixed_policy, brute_force_step, inner_policy, solve_ftrl_step, CumulativeLoss,
    DualState, SolverConfig,
};
