//! Tabular learners behind the [`Learner`] interface: they update online
//! from each observed transition and need no replay memory.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agents::tabular::{
    lenient_q_update, tabular_update, Experience, QTable, TabularQ, TabularVariant,
};
use crate::agents::{argmax_tiebreak, AgentConfig, Learner, StepMetrics};
use crate::lenient::{LeniencyParams, TemperatureTable};
use crate::replay::Transition;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TabularKind {
    Single,
    Double,
    Weighted,
    Lenient,
}

pub struct TabularAgent {
    kind: TabularKind,
    tq: TabularQ,
    lenient_q: QTable,
    temps: TemperatureTable,
    lenient: LeniencyParams,
    /// Tabular step size.
    alpha: f64,
    gamma: f64,
    c: f64,
    epsilon_cfg: AgentConfig,
    rng: ChaCha8Rng,
    act_count: u64,
    n_actions: usize,
}

impl TabularAgent {
    pub fn new(
        kind: TabularKind,
        n_actions: usize,
        alpha: f64,
        cfg: AgentConfig,
        lenient: LeniencyParams,
        seed: u64,
    ) -> Self {
        let variant = match kind {
            TabularKind::Double => TabularVariant::Double,
            TabularKind::Weighted => TabularVariant::Weighted,
            _ => TabularVariant::Single,
        };
        Self {
            kind,
            tq: TabularQ::new(variant, n_actions),
            lenient_q: QTable::new(n_actions),
            temps: TemperatureTable::new(n_actions, lenient.max_temperature),
            lenient,
            alpha,
            gamma: cfg.gamma,
            c: cfg.c,
            epsilon_cfg: cfg,
            rng: ChaCha8Rng::seed_from_u64(seed),
            act_count: 0,
            n_actions,
        }
    }

    pub fn table(&self) -> &TabularQ {
        &self.tq
    }

    pub fn lenient_table(&self) -> &QTable {
        &self.lenient_q
    }

    fn value_row(&self, state_key: u64) -> Vec<f64> {
        match self.kind {
            TabularKind::Lenient => self.lenient_q.row(state_key),
            _ => self.tq.mean_row(state_key),
        }
    }
}

impl Learner for TabularAgent {
    fn act(&mut self, _enc: &[f64], state_key: u64) -> usize {
        let eps = self.epsilon_cfg.epsilon_at(self.act_count);
        self.act_count += 1;
        if self.rng.gen::<f64>() < eps {
            self.rng.gen_range(0..self.n_actions)
        } else {
            let row = self.value_row(state_key);
            argmax_tiebreak(&row, &mut self.rng)
        }
    }

    fn observe(&mut self, t: Transition) {
        let exp = Experience {
            state_key: t.state_key,
            action: t.action,
            reward: t.reward,
            next_state_key: t.next_state_key,
            terminal: t.terminal,
        };
        match self.kind {
            TabularKind::Lenient => lenient_q_update(
                &mut self.lenient_q,
                &exp,
                &mut self.temps,
                &self.lenient,
                self.alpha,
                self.gamma,
                &mut self.rng,
            ),
            _ => tabular_update(&mut self.tq, &exp, self.alpha, self.gamma, self.c, &mut self.rng),
        }
    }

    fn learn(&mut self) -> StepMetrics {
        // Tabular learners update online in `observe`.
        StepMetrics::default()
    }

    fn episode_end(&mut self) {}

    fn epsilon(&self) -> f64 {
        self.epsilon_cfg.epsilon_at(self.act_count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn transition(s: u64, a: usize, r: f64, s2: u64, terminal: bool) -> Transition {
        Transition {
            state: vec![0.0],
            action: a,
            reward: r,
            next_state: vec![0.0],
            terminal,
            state_key: s,
            next_state_key: s2,
        }
    }

    #[test]
    fn single_agent_learns_a_two_state_chain() {
        // s0 --a1--> s1 --a1--> terminal reward 1; a0 loops with reward 0.
        let cfg = AgentConfig {
            epsilon_start: 0.3,
            epsilon_end: 0.3,
            ..Default::default()
        };
        let mut agent = TabularAgent::new(
            TabularKind::Single,
            2,
            0.5,
            cfg,
            LeniencyParams::default(),
            0,
        );
        for _ in 0..300 {
            let mut s = 0u64;
            for _ in 0..20 {
                let a = agent.act(&[0.0], s);
                let (r, s2, terminal) = match (s, a) {
                    (0, 1) => (0.0, 1, false),
                    (1, 1) => (1.0, 2, true),
                    (_, _) => (0.0, s, false),
                };
                agent.observe(transition(s, a, r, s2, terminal));
                if terminal {
                    break;
                }
                s = s2;
            }
            agent.episode_end();
        }
        assert!(agent.table().u.get(1, 1) > 0.9);
        assert!(agent.table().u.get(0, 1) > agent.table().u.get(0, 0));
    }

    #[test]
    fn lenient_agent_tracks_temperatures() {
        let mut agent = TabularAgent::new(
            TabularKind::Lenient,
            2,
            0.5,
            AgentConfig::default(),
            LeniencyParams::default(),
            1,
        );
        agent.observe(transition(0, 0, 5.0, 1, true));
        assert!(agent.temps.get(0, 0) < 1.0);
        assert_eq!(agent.lenient_table().get(0, 0), 2.5);
    }
}
