//! Seeded experiment runs: the episode loop for both games, per-episode
//! records, windowed summaries, and CSV emission.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agents::{
    BaselineKind, DeepQAgent, Learner, StepMetrics, TabularAgent, TabularKind,
    WddqnAgent, WddqnOptions,
};
use crate::derive_seed;
use crate::env::{
    Action, EnvError, Layout, Outcome, Pacman, PacmanConfig, Predator, PredatorConfig,
    DEFAULT_MAP,
};
use crate::harness::config::{AgentKind, EnvSpec, ExperimentConfig};
use crate::harness::metrics::{efficiency_ratio, rolling_metrics, WindowStats};
use crate::harness::HarnessError;
use crate::replay::Transition;

/// Window size of the summary statistics.
pub const SUMMARY_WINDOW: usize = 50;

#[derive(Debug, Clone)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub total_reward: f64,
    pub steps: u32,
    pub efficiency_ratio: f64,
    /// Exploration rate at the first step of the episode.
    pub epsilon: f64,
    pub loss_u: f64,
    pub loss_v: f64,
    pub loss_lrn: f64,
    pub outcome: Outcome,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub windows: Vec<WindowStats>,
    pub final_window: WindowStats,
    pub wall_clock: Duration,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub records: Vec<EpisodeRecord>,
    pub summary: RunSummary,
}

impl RunResult {
    pub fn rewards(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.total_reward).collect()
    }

    pub fn ratios(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.efficiency_ratio).collect()
    }
}

fn build_agent(
    cfg: &ExperimentConfig,
    obs_dim: usize,
    n_actions: usize,
    seed: u64,
) -> Result<Box<dyn Learner>, HarnessError> {
    let agent: Box<dyn Learner> = match cfg.agent_kind {
        AgentKind::Wddqn | AgentKind::WddqnNoLrnSrs | AgentKind::WddqnLrnOnly => {
            let options = match cfg.agent_kind {
                AgentKind::Wddqn => WddqnOptions { use_lrn: true, use_srs: true },
                AgentKind::WddqnLrnOnly => WddqnOptions { use_lrn: true, use_srs: false },
                _ => WddqnOptions { use_lrn: false, use_srs: false },
            };
            Box::new(WddqnAgent::new(
                obs_dim,
                n_actions,
                cfg.agent.clone(),
                cfg.lenient,
                cfg.schedule,
                options,
                cfg.gate,
                seed,
            )?)
        }
        AgentKind::Dqn | AgentKind::Ddqn | AgentKind::Lenient => {
            let kind = match cfg.agent_kind {
                AgentKind::Dqn => BaselineKind::Dqn,
                AgentKind::Ddqn => BaselineKind::Ddqn,
                _ => BaselineKind::LenientDqn,
            };
            Box::new(DeepQAgent::new(
                kind,
                obs_dim,
                n_actions,
                cfg.agent.clone(),
                cfg.lenient,
                cfg.gate,
                seed,
            )?)
        }
        AgentKind::TabularSingle
        | AgentKind::TabularDouble
        | AgentKind::TabularWeighted
        | AgentKind::TabularLenient => {
            let kind = match cfg.agent_kind {
                AgentKind::TabularSingle => TabularKind::Single,
                AgentKind::TabularDouble => TabularKind::Double,
                AgentKind::TabularWeighted => TabularKind::Weighted,
                _ => TabularKind::Lenient,
            };
            Box::new(TabularAgent::new(
                kind,
                n_actions,
                cfg.tabular_alpha,
                cfg.agent.clone(),
                cfg.lenient,
                seed,
            ))
        }
    };
    Ok(agent)
}

#[derive(Default)]
struct EpisodeAccumulator {
    loss_u: f64,
    loss_v: f64,
    loss_lrn: f64,
    updates: u64,
}

impl EpisodeAccumulator {
    fn add(&mut self, m: &StepMetrics) {
        if m.updated {
            self.loss_u += m.loss_u;
            self.loss_v += m.loss_v;
            self.loss_lrn += m.loss_lrn;
            self.updates += 1;
        }
    }

    fn means(&self) -> (f64, f64, f64) {
        if self.updates == 0 {
            (0.0, 0.0, 0.0)
        } else {
            let n = self.updates as f64;
            (self.loss_u / n, self.loss_v / n, self.loss_lrn / n)
        }
    }
}

/// Execute one seeded run. When `out_dir` is given, writes `episodes.csv`,
/// `summary.csv`, and `meta.csv` into it (creating the directory).
pub fn run(
    cfg: &ExperimentConfig,
    seed: u64,
    out_dir: Option<&Path>,
) -> Result<RunResult, HarnessError> {
    let start = Instant::now();
    let records = match &cfg.env {
        EnvSpec::Pacman { size, goal_mode, max_steps } => {
            let mut pc = PacmanConfig::new(*size);
            pc.goal_mode = *goal_mode;
            if let Some(cap) = max_steps {
                pc.max_steps = *cap;
            }
            run_pacman(&Pacman::new(pc)?, cfg, seed)?
        }
        EnvSpec::Predator { variant, map, max_steps } => {
            let layout = match map {
                Some(path) => Layout::parse(&fs::read_to_string(path)?)
                    .map_err(|e| HarnessError::BadInput {
                        file: path.display().to_string(),
                        msg: e.to_string(),
                    })?,
                None => Layout::parse(DEFAULT_MAP).expect("bundled map is valid"),
            };
            let mut pc = PredatorConfig::new(layout, *variant);
            pc.max_steps = *max_steps;
            run_predator(&Predator::new(pc)?, cfg, seed)?
        }
    };

    let rewards: Vec<f64> = records.iter().map(|r| r.total_reward).collect();
    let windows = rolling_metrics(&rewards, SUMMARY_WINDOW);
    let final_window = *windows.last().expect("at least one episode");
    let summary = RunSummary {
        windows,
        final_window,
        wall_clock: start.elapsed(),
    };
    let result = RunResult { records, summary };

    if let Some(dir) = out_dir {
        write_outputs(&result, cfg, seed, dir)?;
    }
    Ok(result)
}

fn run_pacman(
    env: &Pacman,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<Vec<EpisodeRecord>, HarnessError> {
    let mut env_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
    let mut agent = build_agent(cfg, env.obs_dim(), Action::COUNT, derive_seed(seed, 1))?;

    let mut records = Vec::with_capacity(cfg.max_episodes);
    for episode in 0..cfg.max_episodes {
        let mut state = env.reset(&mut env_rng);
        let min_steps = env.min_steps(&state);
        let epsilon = agent.epsilon();
        let mut acc = EpisodeAccumulator::default();
        let mut total_reward = 0.0;
        let outcome;
        loop {
            let enc = env.encode(&state);
            let key = env.state_key(&state);
            let action_idx = agent.act(&enc, key);
            let action = Action::from_index(action_idx).expect("agent emits valid actions");
            let step = env.step(&state, action, &mut env_rng)?;
            agent.observe(Transition {
                state: enc,
                action: action_idx,
                reward: step.reward,
                next_state: env.encode(&step.next),
                terminal: step.terminal,
                state_key: key,
                next_state_key: env.state_key(&step.next),
            });
            acc.add(&agent.learn());
            total_reward += step.reward;
            state = step.next;
            if step.terminal {
                outcome = step.outcome;
                break;
            }
        }
        agent.episode_end();
        let (loss_u, loss_v, loss_lrn) = acc.means();
        records.push(EpisodeRecord {
            episode,
            total_reward,
            steps: state.steps_taken,
            efficiency_ratio: efficiency_ratio(
                min_steps,
                state.steps_taken,
                outcome == Outcome::Goal,
            ),
            epsilon,
            loss_u,
            loss_v,
            loss_lrn,
            outcome,
        });
    }
    Ok(records)
}

fn run_predator(
    env: &Predator,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<Vec<EpisodeRecord>, HarnessError> {
    let mut env_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
    // Independent learners: each agent owns its networks and memories and
    // observes the joint state plus the shared team reward.
    let mut agents = [
        build_agent(cfg, env.obs_dim(), Action::COUNT, derive_seed(seed, 1))?,
        build_agent(cfg, env.obs_dim(), Action::COUNT, derive_seed(seed, 2))?,
    ];

    let mut records = Vec::with_capacity(cfg.max_episodes);
    for episode in 0..cfg.max_episodes {
        let mut state = env.reset();
        let min_steps = env.min_steps(&state)?;
        let epsilon = agents[0].epsilon();
        let mut acc = EpisodeAccumulator::default();
        let mut total_reward = 0.0;
        let outcome;
        loop {
            let enc = env.encode(&state);
            let key = env.state_key(&state);
            let actions = [agents[0].act(&enc, key), agents[1].act(&enc, key)];
            let joint = (
                Action::from_index(actions[0]).expect("agent emits valid actions"),
                Action::from_index(actions[1]).expect("agent emits valid actions"),
            );
            let step = env.step(&state, joint, &mut env_rng)?;
            let next_enc = env.encode(&step.next);
            let next_key = env.state_key(&step.next);
            for (agent, &action) in agents.iter_mut().zip(&actions) {
                agent.observe(Transition {
                    state: enc.clone(),
                    action,
                    reward: step.reward,
                    next_state: next_enc.clone(),
                    terminal: step.terminal,
                    state_key: key,
                    next_state_key: next_key,
                });
                acc.add(&agent.learn());
            }
            total_reward += step.reward;
            state = step.next;
            if step.terminal {
                outcome = step.outcome;
                break;
            }
        }
        for agent in agents.iter_mut() {
            agent.episode_end();
        }
        let (loss_u, loss_v, loss_lrn) = acc.means();
        records.push(EpisodeRecord {
            episode,
            total_reward,
            steps: state.steps_taken,
            efficiency_ratio: efficiency_ratio(
                min_steps,
                state.steps_taken,
                outcome == Outcome::Goal,
            ),
            epsilon,
            loss_u,
            loss_v,
            loss_lrn,
            outcome,
        });
    }
    Ok(records)
}

/// Render `episodes.csv`. Stable column order; floats use Rust's shortest
/// round-trip formatting, so identical runs produce identical bytes.
pub fn render_episodes_csv(records: &[EpisodeRecord]) -> String {
    let mut out =
        String::from("episode,total_reward,steps,efficiency_ratio,epsilon,loss_u,loss_v,loss_lrn,outcome\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.episode,
            r.total_reward,
            r.steps,
            r.efficiency_ratio,
            r.epsilon,
            r.loss_u,
            r.loss_v,
            r.loss_lrn,
            r.outcome.as_str()
        ));
    }
    out
}

/// Render `summary.csv` (one row per non-overlapping window).
pub fn render_summary_csv(windows: &[WindowStats]) -> String {
    let mut out = String::from("window,start_episode,end_episode,mean_reward,min_reward,max_reward\n");
    for (i, w) in windows.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            i, w.start, w.end, w.mean, w.min, w.max
        ));
    }
    out
}

fn render_meta_csv(cfg: &ExperimentConfig, seed: u64, episodes: usize) -> String {
    let (ref_optimal, ref_suboptimal) = reference_lines(&cfg.env);
    format!(
        "agent,seed,env,episodes,ref_optimal,ref_suboptimal\n{},{},{},{},{},{}\n",
        cfg.agent_kind.as_str(),
        seed,
        cfg.env.name(),
        episodes,
        ref_optimal.map_or(String::new(), |v| v.to_string()),
        ref_suboptimal.map_or(String::new(), |v| v.to_string()),
    )
}

/// Expected rewards of the optimal and suboptimal goals, for reference
/// lines in comparison plots (predator game only).
pub fn reference_lines(env: &EnvSpec) -> (Option<f64>, Option<f64>) {
    match env {
        EnvSpec::Pacman { .. } => (None, None),
        EnvSpec::Predator { variant, .. } => {
            let cfg = PredatorConfig::default_map(*variant);
            (Some(cfg.reward_g.mean()), Some(cfg.reward_s.mean()))
        }
    }
}

fn write_outputs(
    result: &RunResult,
    cfg: &ExperimentConfig,
    seed: u64,
    dir: &Path,
) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    let mut f = fs::File::create(dir.join("episodes.csv"))?;
    f.write_all(render_episodes_csv(&result.records).as_bytes())?;
    let mut f = fs::File::create(dir.join("summary.csv"))?;
    f.write_all(render_summary_csv(&result.summary.windows).as_bytes())?;
    let mut f = fs::File::create(dir.join("meta.csv"))?;
    f.write_all(render_meta_csv(cfg, seed, result.records.len()).as_bytes())?;
    Ok(())
}

impl From<EnvError> for HarnessError {
    fn from(e: EnvError) -> Self {
        HarnessError::Env(e)
    }
}
