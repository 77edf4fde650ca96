//! Learning agents: tabular estimators (single, double, weighted double)
//! and deep agents (DQN, double DQN, a leniency-gated DQN, and the weighted
//! double deep Q-network with its lenient reward network and scheduled
//! replay), behind one act/observe/learn interface for the harness.

use rand::Rng;

use crate::replay::Transition;

pub mod tabular;

mod deep;
pub use deep::{
    ddqn_target, weighted_target_parts, weighted_targets, AgentError, BaselineKind, DeepQAgent,
    WddqnAgent, WddqnOptions,
};

mod tabular_agent;
pub use tabular_agent::{TabularAgent, TabularKind};

/// Shared agent hyperparameters.
#[derive(Debug, Clone)]
pub struct AgentConfig {
    /// Discount factor.
    pub gamma: f64,
    /// Spread constant of the weighted-estimator mix `beta = d / (c + d)`.
    pub c: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Steps over which epsilon anneals linearly before staying constant.
    pub epsilon_decay_steps: u64,
    pub batch_size: usize,
    /// Adam learning rate for all networks.
    pub lr: f64,
    /// Target-network copy interval, in training steps (baselines only).
    pub target_sync_interval: u64,
    /// Hidden layer widths of the Q-networks.
    pub hidden: Vec<usize>,
    /// Hidden layer widths of the lenient reward network.
    pub lrn_hidden: Vec<usize>,
    pub replay_capacity: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            c: 0.1,
            epsilon_start: 1.0,
            epsilon_end: 0.01,
            epsilon_decay_steps: 10_000,
            batch_size: 32,
            lr: 1e-4,
            target_sync_interval: 500,
            hidden: vec![128, 128],
            lrn_hidden: vec![64, 64],
            replay_capacity: 8192,
        }
    }
}

impl AgentConfig {
    /// Exploration rate after `step` environment steps: linear from
    /// `epsilon_start` to `epsilon_end` over `epsilon_decay_steps`, constant
    /// afterwards.
    pub fn epsilon_at(&self, step: u64) -> f64 {
        if step >= self.epsilon_decay_steps {
            self.epsilon_end
        } else {
            let frac = step as f64 / self.epsilon_decay_steps as f64;
            self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
        }
    }
}

/// Mixing weight of the weighted double estimator. `evaluator_row` is the
/// co-estimator's Q-row at the successor state, `a_star` the action picked
/// by the estimator being updated. The spread between the evaluator's value
/// of `a_star` and its worst action sets `beta = d / (c + d)`, in `[0, 1)`.
pub fn compute_beta(evaluator_row: &[f64], a_star: usize, c: f64) -> f64 {
    debug_assert!(c > 0.0 && !evaluator_row.is_empty());
    let min = evaluator_row.iter().copied().fold(f64::INFINITY, f64::min);
    let delta = (evaluator_row[a_star] - min).abs();
    delta / (c + delta)
}

/// Index of the maximum value, with exact ties broken uniformly at random.
pub fn argmax_tiebreak<R: Rng>(values: &[f64], rng: &mut R) -> usize {
    debug_assert!(!values.is_empty());
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties = values.iter().filter(|&&v| v == best).count();
    let mut pick = rng.gen_range(0..ties);
    for (i, &v) in values.iter().enumerate() {
        if v == best {
            if pick == 0 {
                return i;
            }
            pick -= 1;
        }
    }
    unreachable!("argmax over non-empty slice")
}

/// Per-learn-step diagnostics.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepMetrics {
    /// False while the replay memory is still below one batch.
    pub updated: bool,
    pub loss_u: f64,
    pub loss_v: f64,
    pub loss_lrn: f64,
    pub beta_mean: f64,
    /// Which network the coin flip trained this step (WDDQN only).
    pub trained_u: bool,
}

/// Uniform interface the experiment loop drives.
pub trait Learner {
    /// Epsilon-greedy action for the encoded observation. `state_key` is the
    /// discrete identifier tabular learners index by.
    fn act(&mut self, enc: &[f64], state_key: u64) -> usize;

    /// Record one environment transition.
    fn observe(&mut self, t: Transition);

    /// One training step; a no-op while the memory is underfilled.
    fn learn(&mut self) -> StepMetrics;

    /// Episode boundary: flush episodic state into long-term memory.
    fn episode_end(&mut self);

    /// Current exploration rate, for logging.
    fn epsilon(&self) -> f64;
}
