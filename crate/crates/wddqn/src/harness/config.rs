//! Experiment configuration: a flat `key = value` text format covering the
//! environment, the agent, and the training schedule.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::agents::AgentConfig;
use crate::env::{GoalMode, PredatorVariant};
use crate::lenient::{LeniencyParams, NegativeGate};
use crate::replay::PrioritySchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentKind {
    Dqn,
    Ddqn,
    /// Leniency-gated DQN.
    Lenient,
    Wddqn,
    WddqnNoLrnSrs,
    WddqnLrnOnly,
    TabularSingle,
    TabularDouble,
    TabularWeighted,
    TabularLenient,
}

impl AgentKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "dqn" => AgentKind::Dqn,
            "ddqn" => AgentKind::Ddqn,
            "lenient" => AgentKind::Lenient,
            "wddqn" => AgentKind::Wddqn,
            "wddqn-no-lrn-srs" => AgentKind::WddqnNoLrnSrs,
            "wddqn-lrn-only" => AgentKind::WddqnLrnOnly,
            "tabular-single" => AgentKind::TabularSingle,
            "tabular-double" => AgentKind::TabularDouble,
            "tabular-weighted" => AgentKind::TabularWeighted,
            "tabular-lenient" => AgentKind::TabularLenient,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::Dqn => "dqn",
            AgentKind::Ddqn => "ddqn",
            AgentKind::Lenient => "lenient",
            AgentKind::Wddqn => "wddqn",
            AgentKind::WddqnNoLrnSrs => "wddqn-no-lrn-srs",
            AgentKind::WddqnLrnOnly => "wddqn-lrn-only",
            AgentKind::TabularSingle => "tabular-single",
            AgentKind::TabularDouble => "tabular-double",
            AgentKind::TabularWeighted => "tabular-weighted",
            AgentKind::TabularLenient => "tabular-lenient",
        }
    }
}

#[derive(Debug, Clone)]
pub enum EnvSpec {
    Pacman {
        size: usize,
        goal_mode: GoalMode,
        /// Defaults to `4 * size^2` when absent.
        max_steps: Option<u32>,
    },
    Predator {
        variant: PredatorVariant,
        /// Path to a `.map` file; the bundled map when absent.
        map: Option<PathBuf>,
        max_steps: u32,
    },
}

impl EnvSpec {
    /// Stable name used in metadata and by `compare` to reject mixed runs.
    pub fn name(&self) -> String {
        match self {
            EnvSpec::Pacman { size, .. } => format!("pacman-{size}"),
            EnvSpec::Predator { variant, .. } => match variant {
                PredatorVariant::Deterministic => "predator-deterministic".into(),
                PredatorVariant::Stochastic => "predator-stochastic".into(),
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    pub agent_kind: AgentKind,
    pub agent: AgentConfig,
    pub lenient: LeniencyParams,
    pub schedule: PrioritySchedule,
    pub gate: NegativeGate,
    /// Step size of the tabular agents.
    pub tabular_alpha: f64,
    pub max_episodes: usize,
}

impl ExperimentConfig {
    pub fn new(env: EnvSpec, agent_kind: AgentKind) -> Self {
        Self {
            env,
            agent_kind,
            agent: AgentConfig::default(),
            lenient: LeniencyParams::default(),
            schedule: PrioritySchedule::default(),
            gate: NegativeGate::default(),
            tabular_alpha: 0.1,
            max_episodes: 2500,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: expected 'key = value'")]
    Syntax { line: usize },
    #[error("line {line}: unknown key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value '{value}' for '{key}'")]
    BadValue {
        line: usize,
        key: String,
        value: String,
    },
    #[error("config must set '{0}'")]
    MissingKey(&'static str),
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    parse_config(&fs::read_to_string(path)?)
}

/// Parse the flat `key = value` format. `#` starts a comment; blank lines
/// are ignored. `env.name` and `agent.kind` are required, everything else
/// defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut env_name: Option<String> = None;
    let mut env_size = 5usize;
    let mut goal_mode = GoalMode::RandomPerEpisode;
    let mut env_variant = PredatorVariant::Deterministic;
    let mut env_map: Option<PathBuf> = None;
    let mut env_max_steps: Option<u32> = None;

    let mut agent_kind: Option<AgentKind> = None;
    let mut agent = AgentConfig::default();
    let mut lenient = LeniencyParams::default();
    let mut schedule = PrioritySchedule::default();
    let mut gate = NegativeGate::default();
    let mut tabular_alpha = 0.1;
    let mut max_episodes = 2500usize;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or(ConfigError::Syntax { line: line_no })?;
        let key = key.trim();
        let value = value.trim();
        let bad = || ConfigError::BadValue {
            line: line_no,
            key: key.to_string(),
            value: value.to_string(),
        };

        macro_rules! num {
            ($ty:ty) => {
                value.parse::<$ty>().map_err(|_| bad())?
            };
        }

        match key {
            "env.name" => env_name = Some(value.to_string()),
            "env.size" => env_size = num!(usize),
            "env.goal_mode" => {
                goal_mode = match value {
                    "random" => GoalMode::RandomPerEpisode,
                    "fixed" => GoalMode::FixedBottomRight,
                    _ => return Err(bad()),
                }
            }
            "env.variant" => {
                env_variant = match value {
                    "deterministic" => PredatorVariant::Deterministic,
                    "stochastic" => PredatorVariant::Stochastic,
                    _ => return Err(bad()),
                }
            }
            "env.map" => env_map = Some(PathBuf::from(value)),
            "env.max_steps" => env_max_steps = Some(num!(u32)),
            "agent.kind" => {
                agent_kind = Some(AgentKind::parse(value).ok_or_else(bad)?);
            }
            "agent.gamma" => agent.gamma = num!(f64),
            "agent.c" => agent.c = num!(f64),
            "agent.lr" => agent.lr = num!(f64),
            "agent.batch_size" => agent.batch_size = num!(usize),
            "agent.epsilon_start" => agent.epsilon_start = num!(f64),
            "agent.epsilon_end" => agent.epsilon_end = num!(f64),
            "agent.epsilon_decay_steps" => agent.epsilon_decay_steps = num!(u64),
            "agent.target_sync_interval" => agent.target_sync_interval = num!(u64),
            "agent.hidden" => agent.hidden = parse_sizes(value).ok_or_else(bad)?,
            "agent.lrn_hidden" => agent.lrn_hidden = parse_sizes(value).ok_or_else(bad)?,
            "agent.replay_capacity" => agent.replay_capacity = num!(usize),
            "agent.alpha" => tabular_alpha = num!(f64),
            "replay.rho_c" => schedule.rho_c = num!(f64),
            "replay.u" => schedule.u = num!(f64),
            "replay.w_max" => schedule.w_max = num!(f64),
            "lenient.K" => lenient.k = num!(f64),
            "lenient.kappa" => lenient.kappa = num!(f64),
            "lenient.eta" => lenient.eta = num!(f64),
            "lenient.max_temperature" => lenient.max_temperature = num!(f64),
            "lenient.gate" => {
                gate = match value {
                    "above" => NegativeGate::PassAboveLeniency,
                    "below" => NegativeGate::PassBelowLeniency,
                    _ => return Err(bad()),
                }
            }
            "train.max_episodes" => max_episodes = num!(usize),
            _ => {
                return Err(ConfigError::UnknownKey {
                    line: line_no,
                    key: key.to_string(),
                })
            }
        }
    }

    let env = match env_name.as_deref() {
        Some("pacman") => EnvSpec::Pacman {
            size: env_size,
            goal_mode,
            max_steps: env_max_steps,
        },
        Some("predator") => EnvSpec::Predator {
            variant: env_variant,
            map: env_map,
            max_steps: env_max_steps.unwrap_or(200),
        },
        Some(other) => {
            return Err(ConfigError::BadValue {
                line: 0,
                key: "env.name".into(),
                value: other.to_string(),
            })
        }
        None => return Err(ConfigError::MissingKey("env.name")),
    };
    let agent_kind = agent_kind.ok_or(ConfigError::MissingKey("agent.kind"))?;

    Ok(ExperimentConfig {
        env,
        agent_kind,
        agent,
        lenient,
        schedule,
        gate,
        tabular_alpha,
        max_episodes,
    })
}

fn parse_sizes(value: &str) -> Option<Vec<usize>> {
    let sizes: Result<Vec<usize>, _> =
        value.split(',').map(|p| p.trim().parse::<usize>()).collect();
    sizes.ok().filter(|v| !v.is_empty() && v.iter().all(|&s| s > 0))
}
