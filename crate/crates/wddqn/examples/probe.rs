// Temporary diagnostic: watch priority scale, beta, LRN estimates, and Q
// values during a short pacman run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wddqn::agents::{AgentConfig, Learner, WddqnAgent, WddqnOptions};
use wddqn::env::{Action, Pacman, PacmanConfig};
use wddqn::lenient::{LeniencyParams, NegativeGate};
use wddqn::replay::{PrioritySchedule, Transition};

fn main() {
    let env = Pacman::new(PacmanConfig::new(5)).unwrap();
    let mut env_rng = ChaCha8Rng::seed_from_u64(0);
    let mut agent = WddqnAgent::new(
        env.obs_dim(),
        4,
        AgentConfig::default(),
        LeniencyParams::default(),
        PrioritySchedule::default(),
        WddqnOptions::default(),
        NegativeGate::default(),
        1,
    )
    .unwrap();

    for episode in 0..800usize {
        let mut state = env.reset(&mut env_rng);
        let mut beta_sum = 0.0;
        let mut beta_n = 0;
        loop {
            let enc = env.encode(&state);
            let key = env.state_key(&state);
            let a = agent.act(&enc, key);
            let step = env.step(&state, Action::from_index(a).unwrap(), &mut env_rng).unwrap();
            agent.observe(Transition {
                state: enc,
                action: a,
                reward: step.reward,
                next_state: env.encode(&step.next),
                terminal: step.terminal,
                state_key: key,
                next_state_key: env.state_key(&step.next),
            });
            let m = agent.learn();
            if m.updated {
                beta_sum += m.beta_mean;
                beta_n += 1;
            }
            state = step.next;
            if step.terminal {
                break;
            }
        }
        agent.episode_end();

        if episode % 100 == 99 {
            let s = env.reset(&mut env_rng);
            let enc = env.encode(&s);
            let row = agent.mean_q_row(&enc);
            let lrn_row = agent.lrn().net().forward(&enc);
            println!(
                "ep {episode}: p_max {:.3e} total_p {:.3e} beta {:.3} q(start) {:?} lrn(start) {:?}",
                agent.memory().max_priority(),
                agent.memory().total_priority(),
                if beta_n > 0 { beta_sum / beta_n as f64 } else { f64::NAN },
                row.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>(),
                lrn_row.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>(),
            );
        }
    }
}
