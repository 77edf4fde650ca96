//! Tabular value estimators: plain Q-learning, double Q-learning with
//! cross-evaluation, the weighted double estimator that blends the two, and
//! the lenient Q-learning update. These double as desk-scale oracles for the
//! deep agents.

use rand::Rng;

use crate::agents::compute_beta;
use crate::lenient::{lenient_gate, leniency, LeniencyParams, TemperatureTable};

/// A discrete transition, the unit the tabular updates consume.
#[derive(Debug, Clone, Copy)]
pub struct Experience {
    pub state_key: u64,
    pub action: usize,
    pub reward: f64,
    pub next_state_key: u64,
    pub terminal: bool,
}

/// Q-value table with a default of 0 for unseen pairs.
#[derive(Debug, Clone, Default)]
pub struct QTable {
    values: std::collections::HashMap<(u64, usize), f64>,
    n_actions: usize,
}

impl QTable {
    pub fn new(n_actions: usize) -> Self {
        Self {
            values: std::collections::HashMap::new(),
            n_actions,
        }
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, state_key: u64, action: usize) -> f64 {
        *self.values.get(&(state_key, action)).unwrap_or(&0.0)
    }

    pub fn set(&mut self, state_key: u64, action: usize, value: f64) {
        self.values.insert((state_key, action), value);
    }

    pub fn row(&self, state_key: u64) -> Vec<f64> {
        (0..self.n_actions).map(|a| self.get(state_key, a)).collect()
    }

    pub fn max(&self, state_key: u64) -> f64 {
        (0..self.n_actions)
            .map(|a| self.get(state_key, a))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// First-index argmax; deterministic so oracle comparisons stay exact.
    pub fn argmax(&self, state_key: u64) -> usize {
        let mut best = 0;
        let mut best_v = self.get(state_key, 0);
        for a in 1..self.n_actions {
            let v = self.get(state_key, a);
            if v > best_v {
                best_v = v;
                best = a;
            }
        }
        best
    }

    /// Sorted (state, action, value) triples, for dumps and checkpoints.
    pub fn entries(&self) -> Vec<(u64, usize, f64)> {
        let mut out: Vec<_> = self.values.iter().map(|(&(s, a), &v)| (s, a, v)).collect();
        out.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TabularVariant {
    Single,
    Double,
    Weighted,
}

/// Tabular learner holding one table (single) or the U/V pair (double and
/// weighted variants).
#[derive(Debug, Clone)]
pub struct TabularQ {
    pub variant: TabularVariant,
    pub u: QTable,
    pub v: QTable,
}

impl TabularQ {
    pub fn new(variant: TabularVariant, n_actions: usize) -> Self {
        Self {
            variant,
            u: QTable::new(n_actions),
            v: QTable::new(n_actions),
        }
    }

    /// Mean of the two tables (the single variant reads its one table).
    pub fn mean_row(&self, state_key: u64) -> Vec<f64> {
        match self.variant {
            TabularVariant::Single => self.u.row(state_key),
            _ => self
                .u
                .row(state_key)
                .iter()
                .zip(self.v.row(state_key))
                .map(|(a, b)| (a + b) / 2.0)
                .collect(),
        }
    }
}

/// One temporal-difference update.
///
/// - single: `Q(s,a) += alpha * (r + gamma * max Q(s',.) - Q(s,a))`
/// - double: a fair coin picks the updated table; the bootstrap action is
///   chosen by the updated table and evaluated by the other.
/// - weighted: like double, but the bootstrap value is the convex
///   combination `beta * own(s', a*) + (1 - beta) * other(s', a*)` with
///   `beta` from the other table's spread at `s'`.
///
/// Terminal transitions bootstrap with 0.
pub fn tabular_update<R: Rng>(
    tq: &mut TabularQ,
    exp: &Experience,
    alpha: f64,
    gamma: f64,
    c: f64,
    rng: &mut R,
) {
    match tq.variant {
        TabularVariant::Single => {
            let q = tq.u.get(exp.state_key, exp.action);
            let boot = if exp.terminal { 0.0 } else { tq.u.max(exp.next_state_key) };
            tq.u.set(
                exp.state_key,
                exp.action,
                q + alpha * (exp.reward + gamma * boot - q),
            );
        }
        TabularVariant::Double => {
            let update_u = rng.gen_bool(0.5);
            let (own, other) = if update_u {
                (&mut tq.u, &tq.v)
            } else {
                (&mut tq.v, &tq.u)
            };
            let q = own.get(exp.state_key, exp.action);
            let boot = if exp.terminal {
                0.0
            } else {
                other.get(exp.next_state_key, own.argmax(exp.next_state_key))
            };
            own.set(
                exp.state_key,
                exp.action,
                q + alpha * (exp.reward + gamma * boot - q),
            );
        }
        TabularVariant::Weighted => {
            let update_u = rng.gen_bool(0.5);
            let (own, other) = if update_u {
                (&mut tq.u, &tq.v)
            } else {
                (&mut tq.v, &tq.u)
            };
            let q = own.get(exp.state_key, exp.action);
            let boot = if exp.terminal {
                0.0
            } else {
                let a_star = own.argmax(exp.next_state_key);
                let beta = compute_beta(&other.row(exp.next_state_key), a_star, c);
                let own_v = own.get(exp.next_state_key, a_star);
                let other_v = other.get(exp.next_state_key, a_star);
                // beta * own + (1 - beta) * other, written so identical
                // estimates collapse exactly.
                other_v + beta * (own_v - other_v)
            };
            own.set(
                exp.state_key,
                exp.action,
                q + alpha * (exp.reward + gamma * boot - q),
            );
        }
    }
}

/// Monte-Carlo probe of estimator bias on a two-state noisy MDP. Half the
/// experience crosses s0 -> s1 with reward 0; the other half takes one of
/// four noisy terminal actions at s1, where action 0 pays {-1, +1} (true
/// value 0, the optimum) and actions 1..3 pay {-1.2, +0.8} (true value
/// -0.2). The noise dwarfs the gap, so argmax reads routinely pick a wrong
/// action. Trains a single, a double, and a weighted learner on the same
/// stream and returns their bootstrap readings at s1: (single max, weighted
/// estimate, double cross-estimate), the latter two averaged over both
/// table directions.
pub fn estimator_bias_probe<R: Rng>(rng: &mut R, steps: usize, alpha: f64, c: f64) -> (f64, f64, f64) {
    const N_ACTIONS: usize = 4;
    let mut single = TabularQ::new(TabularVariant::Single, N_ACTIONS);
    let mut double = TabularQ::new(TabularVariant::Double, N_ACTIONS);
    let mut weighted = TabularQ::new(TabularVariant::Weighted, N_ACTIONS);
    for _ in 0..steps {
        let e = if rng.gen_bool(0.5) {
            Experience {
                state_key: 0,
                action: rng.gen_range(0..N_ACTIONS),
                reward: 0.0,
                next_state_key: 1,
                terminal: false,
            }
        } else {
            let action = rng.gen_range(0..N_ACTIONS);
            let offset = if action == 0 { 0.0 } else { -0.2 };
            Experience {
                state_key: 1,
                action,
                reward: offset + if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
                next_state_key: 2,
                terminal: true,
            }
        };
        tabular_update(&mut single, &e, alpha, 1.0, c, rng);
        tabular_update(&mut double, &e, alpha, 1.0, c, rng);
        tabular_update(&mut weighted, &e, alpha, 1.0, c, rng);
    }

    let single_estimate = single.u.max(1);

    let cross = |chooser: &QTable, evaluator: &QTable| evaluator.get(1, chooser.argmax(1));
    let double_estimate = (cross(&double.u, &double.v) + cross(&double.v, &double.u)) / 2.0;

    let mix = |chooser: &QTable, evaluator: &QTable| {
        let a_star = chooser.argmax(1);
        let beta = compute_beta(&evaluator.row(1), a_star, c);
        let own = chooser.get(1, a_star);
        let other = evaluator.get(1, a_star);
        other + beta * (own - other)
    };
    let weighted_estimate = (mix(&weighted.u, &weighted.v) + mix(&weighted.v, &weighted.u)) / 2.0;

    (single_estimate, weighted_estimate, double_estimate)
}

/// Lenient Q-learning step: the update is applied only when the gate
/// passes (positive deltas always, negative ones with probability `1 - l`),
/// and the pair's temperature is decayed afterwards.
pub fn lenient_q_update<R: Rng>(
    q: &mut QTable,
    exp: &Experience,
    temps: &mut TemperatureTable,
    params: &LeniencyParams,
    alpha: f64,
    gamma: f64,
    rng: &mut R,
) {
    let current = q.get(exp.state_key, exp.action);
    let boot = if exp.terminal { 0.0 } else { q.max(exp.next_state_key) };
    let delta = exp.reward + gamma * boot - current;
    let l = leniency(temps.get(exp.state_key, exp.action), params.k);
    let x: f64 = rng.gen();
    if lenient_gate(delta, l, x) {
        q.set(exp.state_key, exp.action, current + alpha * delta);
    }
    temps.decay(exp.state_key, exp.action, exp.next_state_key, exp.terminal, params);
}
