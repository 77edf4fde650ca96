//! Deep agents.
//!
//! [`WddqnAgent`] keeps twin Q-networks that cross-evaluate each other
//! through the weighted double estimator, a lenient reward network that
//! replaces raw rewards in the TD targets, and a prioritized replay memory
//! filled with scheduled trajectory priorities. [`DeepQAgent`] covers the
//! baselines: DQN, double DQN, and a leniency-gated DQN, each with a
//! periodically copied target network and uniform replay.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::agents::{argmax_tiebreak, compute_beta, AgentConfig, Learner, StepMetrics};
use crate::lenient::{
    lenient_gate_with, leniency, LenientRewardNet, LeniencyParams, LrnSample, NegativeGate,
    RewardStats, TemperatureTable,
};
use crate::nn::{AdamState, Batch, DenseNet, NetError};
use crate::replay::{EpisodicMemory, PrioritySchedule, SumTreeMemory, Transition};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-sample weighted double target:
/// `a* = argmax chooser(s', .)`, `beta` from the evaluator's spread at s',
/// bootstrap `beta * chooser(s', a*) + (1 - beta) * evaluator(s', a*)`,
/// target `base + gamma * bootstrap` (no bootstrap at terminal).
/// `base` is the reward term, either the LRN estimate or the raw reward.
/// Returns `(target, beta)`.
pub fn weighted_target_parts(
    base: f64,
    chooser_next: &[f64],
    evaluator_next: &[f64],
    terminal: bool,
    gamma: f64,
    c: f64,
) -> (f64, f64) {
    if terminal {
        return (base, 0.0);
    }
    let mut a_star = 0;
    for (a, &v) in chooser_next.iter().enumerate() {
        if v > chooser_next[a_star] {
            a_star = a;
        }
    }
    let beta = compute_beta(evaluator_next, a_star, c);
    // beta * chooser + (1 - beta) * evaluator, written so equal estimates
    // collapse exactly.
    let bootstrap =
        evaluator_next[a_star] + beta * (chooser_next[a_star] - evaluator_next[a_star]);
    (base + gamma * bootstrap, beta)
}

/// Weighted double targets for a whole batch. `base_rewards[i]` is the
/// reward term of sample i (LRN estimate or raw reward).
pub fn weighted_targets(
    transitions: &[&Transition],
    base_rewards: &[f64],
    chooser: &DenseNet,
    evaluator: &DenseNet,
    gamma: f64,
    c: f64,
) -> (Vec<f64>, Vec<f64>) {
    let next_states: Vec<&[f64]> = transitions.iter().map(|t| t.next_state.as_slice()).collect();
    let chooser_next = chooser.forward_batch(&next_states);
    let evaluator_next = evaluator.forward_batch(&next_states);
    let mut targets = Vec::with_capacity(transitions.len());
    let mut betas = Vec::with_capacity(transitions.len());
    for (i, t) in transitions.iter().enumerate() {
        let (target, beta) = weighted_target_parts(
            base_rewards[i],
            &chooser_next[i],
            &evaluator_next[i],
            t.terminal,
            gamma,
            c,
        );
        targets.push(target);
        betas.push(beta);
    }
    (targets, betas)
}

/// Double-DQN target for one sample: the online network picks the
/// bootstrap action, the target network evaluates it.
pub fn ddqn_target(
    reward: f64,
    online_next: &[f64],
    target_next: &[f64],
    terminal: bool,
    gamma: f64,
) -> f64 {
    if terminal {
        return reward;
    }
    let mut a_star = 0;
    for (a, &v) in online_next.iter().enumerate() {
        if v > online_next[a_star] {
            a_star = a;
        }
    }
    reward + gamma * target_next[a_star]
}

/// Which of the auxiliary mechanisms a WDDQN instance runs with; disabling
/// them yields the ablation variants.
#[derive(Debug, Clone, Copy)]
pub struct WddqnOptions {
    /// Replace the reward term of TD targets with the lenient reward
    /// network's estimate (and train that network).
    pub use_lrn: bool,
    /// Insert trajectories with the rising priority schedule instead of a
    /// flat `p_max`.
    pub use_srs: bool,
}

impl Default for WddqnOptions {
    fn default() -> Self {
        Self {
            use_lrn: true,
            use_srs: true,
        }
    }
}

/// Weighted double deep Q-network agent.
pub struct WddqnAgent {
    q_u: DenseNet,
    q_v: DenseNet,
    adam_u: AdamState,
    adam_v: AdamState,
    lrn: LenientRewardNet,
    global: SumTreeMemory,
    episodic: EpisodicMemory,
    temps: TemperatureTable,
    stats: RewardStats,
    cfg: AgentConfig,
    lenient: LeniencyParams,
    sched: PrioritySchedule,
    options: WddqnOptions,
    gate: NegativeGate,
    rng: ChaCha8Rng,
    act_count: u64,
    n_actions: usize,
}

impl WddqnAgent {
    pub fn new(
        obs_dim: usize,
        n_actions: usize,
        cfg: AgentConfig,
        lenient: LeniencyParams,
        sched: PrioritySchedule,
        options: WddqnOptions,
        gate: NegativeGate,
        seed: u64,
    ) -> Result<Self, AgentError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut q_sizes = vec![obs_dim];
        q_sizes.extend_from_slice(&cfg.hidden);
        q_sizes.push(n_actions);
        let mut lrn_sizes = vec![obs_dim];
        lrn_sizes.extend_from_slice(&cfg.lrn_hidden);
        lrn_sizes.push(n_actions);

        let q_u = DenseNet::init(&q_sizes, &mut rng)?;
        let q_v = DenseNet::init(&q_sizes, &mut rng)?;
        let adam_u = AdamState::new(&q_u, cfg.lr);
        let adam_v = AdamState::new(&q_v, cfg.lr);
        let lrn = LenientRewardNet::new(&lrn_sizes, cfg.lr, &mut rng)?;
        Ok(Self {
            q_u,
            q_v,
            adam_u,
            adam_v,
            lrn,
            global: SumTreeMemory::new(cfg.replay_capacity),
            episodic: EpisodicMemory::new(),
            temps: TemperatureTable::new(n_actions, lenient.max_temperature),
            stats: RewardStats::new(),
            cfg,
            lenient,
            sched,
            options,
            gate,
            rng,
            act_count: 0,
            n_actions,
        })
    }

    pub fn q_u(&self) -> &DenseNet {
        &self.q_u
    }

    pub fn q_v(&self) -> &DenseNet {
        &self.q_v
    }

    pub fn lrn(&self) -> &LenientRewardNet {
        &self.lrn
    }

    pub fn memory(&self) -> &SumTreeMemory {
        &self.global
    }

    pub fn episodic_len(&self) -> usize {
        self.episodic.len()
    }

    pub fn stats(&self) -> &RewardStats {
        &self.stats
    }

    pub fn temperatures(&self) -> &TemperatureTable {
        &self.temps
    }

    /// Mean of the two Q-rows, the quantity the greedy policy maximizes.
    pub fn mean_q_row(&self, enc: &[f64]) -> Vec<f64> {
        let u = self.q_u.forward(enc);
        let v = self.q_v.forward(enc);
        u.iter().zip(v).map(|(a, b)| (a + b) / 2.0).collect()
    }

    /// Save both Q-networks, the LRN, and the temperature/reward tables.
    pub fn save_checkpoint(&self, dir: &Path) -> Result<(), AgentError> {
        fs::create_dir_all(dir)?;
        self.q_u.save(&dir.join("q_u.net"))?;
        self.q_v.save(&dir.join("q_v.net"))?;
        self.lrn.net().save(&dir.join("lrn.net"))?;
        Ok(())
    }

    /// Restore networks saved by [`WddqnAgent::save_checkpoint`]; shapes
    /// must match this agent's configuration.
    pub fn load_checkpoint(&mut self, dir: &Path) -> Result<(), AgentError> {
        let q_u = DenseNet::load(&dir.join("q_u.net"))?;
        let q_v = DenseNet::load(&dir.join("q_v.net"))?;
        let lrn = DenseNet::load(&dir.join("lrn.net"))?;
        self.q_u.copy_params_from(&q_u)?;
        self.q_v.copy_params_from(&q_v)?;
        self.lrn.net_mut().copy_params_from(&lrn)?;
        Ok(())
    }

    fn learn_step(&mut self) -> StepMetrics {
        let batch_size = self.cfg.batch_size;
        if self.global.len() < batch_size {
            return StepMetrics::default();
        }
        let samples = self
            .global
            .sample(batch_size, &mut self.rng)
            .expect("memory size checked");
        let train_u = self.rng.gen_bool(0.5);

        let transitions: Vec<&Transition> = samples
            .iter()
            .map(|s| self.global.transition(s.leaf).expect("freshly sampled"))
            .collect();
        let states: Vec<&[f64]> = transitions.iter().map(|t| t.state.as_slice()).collect();

        let base_rewards: Vec<f64> = if self.options.use_lrn {
            let rows = self.lrn.predict_batch(&states);
            transitions
                .iter()
                .zip(rows)
                .map(|(t, row)| row[t.action])
                .collect()
        } else {
            transitions.iter().map(|t| t.reward).collect()
        };

        let (chooser, evaluator) = if train_u {
            (&self.q_u, &self.q_v)
        } else {
            (&self.q_v, &self.q_u)
        };
        let (targets, betas) = weighted_targets(
            &transitions,
            &base_rewards,
            chooser,
            evaluator,
            self.cfg.gamma,
            self.cfg.c,
        );

        let batch = Batch {
            inputs: states,
            actions: transitions.iter().map(|t| t.action).collect(),
            targets: targets.clone(),
        };
        let (loss, preds) = if train_u {
            self.q_u.train_batch_detailed(&batch, &mut self.adam_u)
        } else {
            self.q_v.train_batch_detailed(&batch, &mut self.adam_v)
        }
        .expect("batch built from stored transitions");

        let lrn_loss = if self.options.use_lrn {
            let items: Vec<LrnSample> = transitions
                .iter()
                .map(|t| LrnSample {
                    state_key: t.state_key,
                    state: &t.state,
                    action: t.action,
                })
                .collect();
            self.lrn
                .update(
                    &items,
                    &self.stats,
                    &self.temps,
                    &self.lenient,
                    self.gate,
                    &mut self.rng,
                )
                .expect("stats recorded for every observed transition")
        } else {
            0.0
        };

        drop(batch);
        drop(transitions);
        for (i, s) in samples.iter().enumerate() {
            self.global
                .update_priority(s.leaf, targets[i] - preds[i])
                .expect("no eviction between sample and update");
        }

        StepMetrics {
            updated: true,
            loss_u: if train_u { loss } else { 0.0 },
            loss_v: if train_u { 0.0 } else { loss },
            loss_lrn: lrn_loss,
            beta_mean: betas.iter().sum::<f64>() / betas.len() as f64,
            trained_u: train_u,
        }
    }
}

impl Learner for WddqnAgent {
    fn act(&mut self, enc: &[f64], _state_key: u64) -> usize {
        let eps = self.cfg.epsilon_at(self.act_count);
        self.act_count += 1;
        if self.rng.gen::<f64>() < eps {
            self.rng.gen_range(0..self.n_actions)
        } else {
            let row = self.mean_q_row(enc);
            argmax_tiebreak(&row, &mut self.rng)
        }
    }

    fn observe(&mut self, t: Transition) {
        self.stats.record(t.state_key, t.action, t.reward);
        self.episodic.push(t);
    }

    fn learn(&mut self) -> StepMetrics {
        self.learn_step()
    }

    fn episode_end(&mut self) {
        if self.episodic.is_empty() {
            return;
        }
        // Decay every visited pair once, in trajectory order, so the
        // successor-mean fold reads post-episode temperatures.
        if self.options.use_lrn {
            for t in self.episodic.iter() {
                self.temps.decay(
                    t.state_key,
                    t.action,
                    t.next_state_key,
                    t.terminal,
                    &self.lenient,
                );
            }
        }
        if self.options.use_srs {
            self.global.push_trajectory(&mut self.episodic, &self.sched);
        } else {
            // Flat insertion at the current maximum priority.
            let p = self.global.max_priority();
            for t in self.episodic.drain() {
                self.global.push_with_priority(t, p);
            }
        }
    }

    fn epsilon(&self) -> f64 {
        self.cfg.epsilon_at(self.act_count)
    }
}

/// Baseline family sharing the online/target network pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    Dqn,
    Ddqn,
    /// DQN whose negative TD updates are masked by the leniency gate.
    LenientDqn,
}

pub struct DeepQAgent {
    kind: BaselineKind,
    online: DenseNet,
    target: DenseNet,
    adam: AdamState,
    memory: SumTreeMemory,
    temps: TemperatureTable,
    lenient: LeniencyParams,
    gate: NegativeGate,
    /// (state_key, action, next_state_key, terminal) of the running episode,
    /// for the lenient variant's temperature decay.
    episode_trace: Vec<(u64, usize, u64, bool)>,
    cfg: AgentConfig,
    rng: ChaCha8Rng,
    act_count: u64,
    train_count: u64,
    n_actions: usize,
}

impl DeepQAgent {
    pub fn new(
        kind: BaselineKind,
        obs_dim: usize,
        n_actions: usize,
        cfg: AgentConfig,
        lenient: LeniencyParams,
        gate: NegativeGate,
        seed: u64,
    ) -> Result<Self, AgentError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(&cfg.hidden);
        sizes.push(n_actions);
        let online = DenseNet::init(&sizes, &mut rng)?;
        let mut target = DenseNet::init(&sizes, &mut rng)?;
        target.copy_params_from(&online)?;
        let adam = AdamState::new(&online, cfg.lr);
        Ok(Self {
            kind,
            online,
            target,
            adam,
            memory: SumTreeMemory::new(cfg.replay_capacity),
            temps: TemperatureTable::new(n_actions, lenient.max_temperature),
            lenient,
            gate,
            episode_trace: Vec::new(),
            cfg,
            rng,
            act_count: 0,
            train_count: 0,
            n_actions,
        })
    }

    pub fn online(&self) -> &DenseNet {
        &self.online
    }

    pub fn memory(&self) -> &SumTreeMemory {
        &self.memory
    }

    fn learn_step(&mut self) -> StepMetrics {
        let batch_size = self.cfg.batch_size;
        if self.memory.len() < batch_size {
            return StepMetrics::default();
        }
        let samples = self
            .memory
            .sample(batch_size, &mut self.rng)
            .expect("memory size checked");
        let transitions: Vec<&Transition> = samples
            .iter()
            .map(|s| self.memory.transition(s.leaf).expect("freshly sampled"))
            .collect();
        let next_states: Vec<&[f64]> =
            transitions.iter().map(|t| t.next_state.as_slice()).collect();
        let target_next = self.target.forward_batch(&next_states);

        let targets: Vec<f64> = match self.kind {
            BaselineKind::Ddqn => {
                let online_next = self.online.forward_batch(&next_states);
                transitions
                    .iter()
                    .enumerate()
                    .map(|(i, t)| {
                        ddqn_target(
                            t.reward,
                            &online_next[i],
                            &target_next[i],
                            t.terminal,
                            self.cfg.gamma,
                        )
                    })
                    .collect()
            }
            _ => transitions
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    if t.terminal {
                        t.reward
                    } else {
                        let max = target_next[i].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        t.reward + self.cfg.gamma * max
                    }
                })
                .collect(),
        };

        let states: Vec<&[f64]> = transitions.iter().map(|t| t.state.as_slice()).collect();
        let batch = match self.kind {
            BaselineKind::LenientDqn => {
                // Gate negative TD items out of the loss.
                let preds = self.online.forward_batch(&states);
                let mut kept = Batch {
                    inputs: Vec::new(),
                    actions: Vec::new(),
                    targets: Vec::new(),
                };
                for (i, t) in transitions.iter().enumerate() {
                    let delta = targets[i] - preds[i][t.action];
                    let l = leniency(self.temps.get(t.state_key, t.action), self.lenient.k);
                    let x: f64 = self.rng.gen();
                    if lenient_gate_with(delta, l, x, self.gate) {
                        kept.inputs.push(&t.state);
                        kept.actions.push(t.action);
                        kept.targets.push(targets[i]);
                    }
                }
                kept
            }
            _ => Batch {
                inputs: states,
                actions: transitions.iter().map(|t| t.action).collect(),
                targets,
            },
        };

        let loss = if batch.is_empty() {
            0.0
        } else {
            self.online
                .train_batch(&batch, &mut self.adam)
                .expect("batch built from stored transitions")
        };

        self.train_count += 1;
        if self.train_count % self.cfg.target_sync_interval == 0 {
            self.target
                .copy_params_from(&self.online)
                .expect("same architecture");
        }

        StepMetrics {
            updated: true,
            loss_u: loss,
            ..Default::default()
        }
    }
}

impl Learner for DeepQAgent {
    fn act(&mut self, enc: &[f64], _state_key: u64) -> usize {
        let eps = self.cfg.epsilon_at(self.act_count);
        self.act_count += 1;
        if self.rng.gen::<f64>() < eps {
            self.rng.gen_range(0..self.n_actions)
        } else {
            let row = self.online.forward(enc);
            argmax_tiebreak(&row, &mut self.rng)
        }
    }

    fn observe(&mut self, t: Transition) {
        if self.kind == BaselineKind::LenientDqn {
            self.episode_trace
                .push((t.state_key, t.action, t.next_state_key, t.terminal));
        }
        // Uniform replay: a constant priority for every transition.
        self.memory.push_with_priority(t, 1.0);
    }

    fn learn(&mut self) -> StepMetrics {
        self.learn_step()
    }

    fn episode_end(&mut self) {
        for (s, a, s2, terminal) in std::mem::take(&mut self.episode_trace) {
            self.temps.decay(s, a, s2, terminal, &self.lenient);
        }
    }

    fn epsilon(&self) -> f64 {
        self.cfg.epsilon_at(self.act_count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn transition(
        state: Vec<f64>,
        action: usize,
        reward: f64,
        next_state: Vec<f64>,
        terminal: bool,
        key: u64,
        next_key: u64,
    ) -> Transition {
        Transition {
            state,
            action,
            reward,
            next_state,
            terminal,
            state_key: key,
            next_state_key: next_key,
        }
    }

    /// Net with one linear layer from a single always-1 input, so the
    /// output row equals the chosen weights.
    fn row_net(row: &[f64]) -> DenseNet {
        DenseNet::from_parts(
            vec![1, row.len()],
            vec![row.to_vec()],
            vec![vec![0.0; row.len()]],
        )
        .unwrap()
    }

    fn small_cfg() -> AgentConfig {
        AgentConfig {
            hidden: vec![8],
            lrn_hidden: vec![8],
            replay_capacity: 256,
            batch_size: 8,
            lr: 1e-3,
            ..Default::default()
        }
    }

    #[test]
    fn weighted_target_examples() {
        // Terminal: target is the reward term alone.
        let (t, _) = weighted_target_parts(3.5, &[9.0, 1.0], &[5.0, 5.0], true, 0.9, 0.1);
        assert_eq!(t, 3.5);

        // Known beta: chooser picks a* = 0; evaluator row [4.0, 3.9] gives
        // delta = 0.1, beta = 0.5; bootstrap 0.5*2 + 0.5*4 = 3.
        let (t, beta) = weighted_target_parts(1.0, &[2.0, -1.0], &[4.0, 3.9], false, 0.9, 0.1);
        assert!((beta - 0.5).abs() < 1e-12);
        assert!((t - 3.7).abs() < 1e-12);

        // Identical chooser and evaluator collapse to the max bootstrap.
        let row = [0.3, 1.7, -0.2];
        let (t, _) = weighted_target_parts(0.5, &row, &row, false, 1.0, 0.1);
        assert!((t - (0.5 + 1.7)).abs() < 1e-12);
    }

    #[test]
    fn weighted_target_is_a_convex_combination() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..500 {
            let chooser: Vec<f64> = (0..4).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let evaluator: Vec<f64> = (0..4).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let (t, beta) = weighted_target_parts(0.0, &chooser, &evaluator, false, 1.0, 0.1);
            assert!((0.0..1.0).contains(&beta));
            let a_star = (0..4).fold(0, |b, a| if chooser[a] > chooser[b] { a } else { b });
            let lo = chooser[a_star].min(evaluator[a_star]);
            let hi = chooser[a_star].max(evaluator[a_star]);
            assert!(t >= lo - 1e-12 && t <= hi + 1e-12);
        }
    }

    #[test]
    fn ddqn_target_examples() {
        assert_eq!(ddqn_target(2.0, &[0.0, 1.0], &[5.0, 7.0], true, 0.9), 2.0);
        let t = ddqn_target(0.0, &[0.0, 1.0], &[5.0, 7.0], false, 0.9);
        assert!((t - 6.3).abs() < 1e-12);
        // online == target reduces to the DQN max target.
        let row = [4.0, 2.0];
        let t = ddqn_target(1.0, &row, &row, false, 0.5);
        assert!((t - 3.0).abs() < 1e-12);
    }

    #[test]
    fn wddqn_matches_dqn_when_estimators_agree() {
        // Same network as chooser and evaluator, raw rewards: the weighted
        // target equals the DQN max target exactly.
        let net = row_net(&[1.25, -0.5, 0.75]);
        let input = vec![1.0];
        let trans = vec![transition(input.clone(), 1, 2.0, input.clone(), false, 0, 1)];
        let refs: Vec<&Transition> = trans.iter().collect();
        let (targets, _) = weighted_targets(&refs, &[2.0], &net, &net, 0.9, 0.1);
        let next_row = net.forward(&input);
        let expected = ddqn_target(2.0, &next_row, &next_row, false, 0.9);
        assert_eq!(targets[0], expected);
    }

    #[test]
    fn greedy_action_uses_mean_of_both_networks() {
        let mut agent = WddqnAgent::new(
            1,
            4,
            AgentConfig {
                epsilon_start: 0.0,
                epsilon_end: 0.0,
                hidden: vec![4],
                lrn_hidden: vec![4],
                ..Default::default()
            },
            LeniencyParams::default(),
            PrioritySchedule::default(),
            WddqnOptions::default(),
            NegativeGate::default(),
            0,
        )
        .unwrap();
        agent.q_u = row_net(&[1.0, 0.0, 0.0, 0.0]);
        agent.q_v = row_net(&[3.0, 0.0, 0.0, 0.0]);
        for _ in 0..20 {
            assert_eq!(agent.act(&[1.0], 0), 0);
        }

        // Opposite networks: all means are 0, ties break uniformly.
        agent.q_u = row_net(&[1.0, -2.0, 3.0, -4.0]);
        agent.q_v = row_net(&[-1.0, 2.0, -3.0, 4.0]);
        let mut counts = [0u32; 4];
        for _ in 0..8_000 {
            counts[agent.act(&[1.0], 0)] += 1;
        }
        for c in counts {
            let frac = c as f64 / 8_000.0;
            assert!((frac - 0.25).abs() < 0.03, "tie frequency {frac}");
        }
    }

    #[test]
    fn full_exploration_is_uniform() {
        let mut agent = WddqnAgent::new(
            2,
            4,
            AgentConfig {
                epsilon_start: 1.0,
                epsilon_end: 1.0,
                hidden: vec![4],
                lrn_hidden: vec![4],
                ..Default::default()
            },
            LeniencyParams::default(),
            PrioritySchedule::default(),
            WddqnOptions::default(),
            NegativeGate::default(),
            1,
        )
        .unwrap();
        let mut counts = [0u32; 4];
        for _ in 0..8_000 {
            counts[agent.act(&[1.0, 0.0], 0)] += 1;
        }
        for c in counts {
            let frac = c as f64 / 8_000.0;
            assert!((frac - 0.25).abs() < 0.03, "exploration frequency {frac}");
        }
    }

    fn fill_bandit_memory(agent: &mut WddqnAgent, n: usize) {
        for i in 0..n {
            agent.observe(transition(
                vec![1.0],
                i % 2,
                if i % 2 == 0 { 0.0 } else { 1.0 },
                vec![1.0],
                true,
                0,
                0,
            ));
            agent.episode_end();
        }
    }

    #[test]
    fn coin_flip_picks_each_network_half_the_time() {
        let mut agent = WddqnAgent::new(
            1,
            2,
            AgentConfig {
                hidden: vec![4],
                lrn_hidden: vec![4],
                batch_size: 8,
                replay_capacity: 64,
                ..Default::default()
            },
            LeniencyParams::default(),
            PrioritySchedule::default(),
            WddqnOptions::default(),
            NegativeGate::default(),
            2,
        )
        .unwrap();
        fill_bandit_memory(&mut agent, 16);
        let trials = 10_000;
        let mut u_count = 0;
        for _ in 0..trials {
            if agent.learn().trained_u {
                u_count += 1;
            }
        }
        let frac = u_count as f64 / trials as f64;
        assert!((frac - 0.5).abs() < 0.02, "coin frequency {frac}");
    }

    #[test]
    fn learn_is_a_no_op_until_memory_fills() {
        let mut agent = WddqnAgent::new(
            1,
            2,
            small_cfg(),
            LeniencyParams::default(),
            PrioritySchedule::default(),
            WddqnOptions::default(),
            NegativeGate::default(),
            3,
        )
        .unwrap();
        assert!(!agent.learn().updated);
        fill_bandit_memory(&mut agent, 8);
        assert!(agent.learn().updated);
    }

    #[test]
    fn observe_feeds_episodic_memory_and_stats() {
        let mut agent = WddqnAgent::new(
            1,
            2,
            small_cfg(),
            LeniencyParams::default(),
            PrioritySchedule::default(),
            WddqnOptions::default(),
            NegativeGate::default(),
            4,
        )
        .unwrap();
        agent.observe(transition(vec![1.0], 0, -30.0, vec![1.0], false, 7, 8));
        agent.observe(transition(vec![1.0], 0, 40.0, vec![1.0], true, 8, 9));
        assert_eq!(agent.episodic_len(), 2);
        assert_eq!(agent.stats().count(7, 0), 1);
        assert_eq!(agent.stats().mean(7, 0), Some(-30.0));

        agent.episode_end();
        assert_eq!(agent.episodic_len(), 0);
        assert_eq!(agent.memory().len(), 2);
        // Temperatures decayed once per visited pair.
        assert!(agent.temperatures().get(7, 0) < 1.0);
    }

    #[test]
    fn first_trajectory_gets_schedule_priorities() {
        let mut agent = WddqnAgent::new(
            1,
            2,
            small_cfg(),
            LeniencyParams::default(),
            PrioritySchedule::default(),
            WddqnOptions::default(),
            NegativeGate::default(),
            5,
        )
        .unwrap();
        for i in 0..3 {
            agent.observe(transition(vec![1.0], 0, 0.0, vec![1.0], i == 2, i, i + 1));
        }
        agent.episode_end();
        let expected = crate::replay::schedule_weights(3, &PrioritySchedule::default());
        for (slot, e) in expected.iter().enumerate() {
            let p = agent.memory().priority_of(slot).unwrap();
            assert!((p - e).abs() < 1e-12, "slot {slot}: {p} vs {e}");
        }
    }

    #[test]
    fn priorities_after_learning_follow_td_errors() {
        let mut agent = WddqnAgent::new(
            1,
            2,
            AgentConfig {
                hidden: vec![4],
                lrn_hidden: vec![4],
                batch_size: 4,
                replay_capacity: 4,
                lr: 0.0, // keep networks frozen so predictions are stable
                ..Default::default()
            },
            LeniencyParams::default(),
            PrioritySchedule::default(),
            WddqnOptions { use_lrn: false, use_srs: false },
            NegativeGate::default(),
            6,
        )
        .unwrap();
        fill_bandit_memory(&mut agent, 4);
        agent.learn();
        // With lr = 0 predictions stay at their frozen initial values, so
        // every sampled slot now carries |target - prediction| + 1e-3.
        let enc = [1.0];
        for slot in 0..4 {
            let p = agent.memory().priority_of(slot).unwrap();
            let action = slot % 2;
            let reward = if action == 1 { 1.0 } else { 0.0 };
            let pred_u = agent.q_u().forward(&enc)[action];
            let pred_v = agent.q_v().forward(&enc)[action];
            let expected_u = (reward - pred_u).abs() + 1e-3;
            let expected_v = (reward - pred_v).abs() + 1e-3;
            assert!(
                (p - expected_u).abs() < 1e-12 || (p - expected_v).abs() < 1e-12 || p == 1.0,
                "slot {slot} priority {p} matches neither TD error nor the untouched insert"
            );
        }
    }

    #[test]
    fn wddqn_solves_deterministic_bandit() {
        // One-state two-action bandit paying 0 / 1: the greedy action must
        // settle on 1 within 2000 steps for at least 19 of 20 seeds.
        let mut successes = 0;
        for seed in 0..20 {
            let mut agent = WddqnAgent::new(
                1,
                2,
                AgentConfig {
                    hidden: vec![32, 32],
                    lrn_hidden: vec![16, 16],
                    batch_size: 16,
                    replay_capacity: 512,
                    lr: 1e-3,
                    epsilon_decay_steps: 500,
                    epsilon_end: 0.1,
                    ..Default::default()
                },
                LeniencyParams::default(),
                PrioritySchedule::default(),
                WddqnOptions::default(),
                NegativeGate::default(),
                seed,
            )
            .unwrap();
            for _ in 0..2_000 {
                let a = agent.act(&[1.0], 0);
                let reward = if a == 1 { 1.0 } else { 0.0 };
                agent.observe(transition(vec![1.0], a, reward, vec![1.0], true, 0, 0));
                agent.episode_end();
                agent.learn();
            }
            let row = agent.mean_q_row(&[1.0]);
            if row[1] > row[0] {
                successes += 1;
            }
        }
        assert!(successes >= 19, "bandit solved in {successes}/20 seeds");
    }

    #[test]
    fn baseline_target_network_syncs_periodically() {
        let mut agent = DeepQAgent::new(
            BaselineKind::Ddqn,
            1,
            2,
            AgentConfig {
                hidden: vec![8],
                batch_size: 4,
                replay_capacity: 64,
                target_sync_interval: 3,
                lr: 1e-2,
                ..Default::default()
            },
            LeniencyParams::default(),
            NegativeGate::default(),
            7,
        )
        .unwrap();
        for i in 0..8 {
            agent.observe(transition(
                vec![1.0],
                i % 2,
                i as f64,
                vec![1.0],
                true,
                0,
                0,
            ));
        }
        agent.learn();
        assert_ne!(agent.online, agent.target, "online should drift");
        agent.learn();
        agent.learn(); // third training step triggers the copy
        assert_eq!(agent.online, agent.target);
    }

    #[test]
    fn checkpoint_roundtrip_restores_predictions() {
        let dir = tempfile::tempdir().unwrap();
        let mut agent = WddqnAgent::new(
            2,
            2,
            small_cfg(),
            LeniencyParams::default(),
            PrioritySchedule::default(),
            WddqnOptions::default(),
            NegativeGate::default(),
            8,
        )
        .unwrap();
        for i in 0..16 {
            agent.observe(transition(
                vec![1.0, 0.0],
                i % 2,
                i as f64,
                vec![0.0, 1.0],
                true,
                0,
                1,
            ));
            agent.episode_end();
        }
        for _ in 0..10 {
            agent.learn();
        }
        let enc = [1.0, 0.0];
        let before = agent.mean_q_row(&enc);
        agent.save_checkpoint(dir.path()).unwrap();
        for _ in 0..10 {
            agent.learn();
        }
        assert_ne!(agent.mean_q_row(&enc), before);
        agent.load_checkpoint(dir.path()).unwrap();
        assert_eq!(agent.mean_q_row(&enc), before);
    }
}
