//! Stochastic pacman-style gridworld.
//!
//! A single agent starts at the top-left cell and searches for a goal cell.
//! Entering the goal ends the episode with a reward of -30 or +40 (equal
//! probability). Every non-goal move also pays a noisy step reward that
//! depends on the direction: north/west draw from {-10, +6}, south/east from
//! {-8, +6}. Moves off the edge leave the agent in place.

use rand::Rng;

use super::{Action, EnvError, GridPos, Outcome, RewardSpec, Step};

/// Where the goal appears on reset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GoalMode {
    /// Uniform over all cells except the agent start.
    RandomPerEpisode,
    /// Always the bottom-right cell.
    FixedBottomRight,
}

#[derive(Debug, Clone)]
pub struct PacmanConfig {
    /// Grid side length n (the world is n x n).
    pub size: usize,
    pub goal_mode: GoalMode,
    /// Episode step cap; a timeout ends the episode without goal reward.
    pub max_steps: u32,
    pub goal_reward: RewardSpec,
    /// Per-direction step rewards, indexed by `Action::index()`.
    pub step_rewards: [RewardSpec; 4],
}

impl PacmanConfig {
    pub fn new(size: usize) -> Self {
        let north_west = RewardSpec::Choice(vec![(-10.0, 0.5), (6.0, 0.5)]);
        let south_east = RewardSpec::Choice(vec![(-8.0, 0.5), (6.0, 0.5)]);
        Self {
            size,
            goal_mode: GoalMode::RandomPerEpisode,
            max_steps: 4 * (size * size) as u32,
            goal_reward: RewardSpec::Choice(vec![(-30.0, 0.5), (40.0, 0.5)]),
            step_rewards: [
                north_west.clone(),
                south_east.clone(),
                south_east,
                north_west,
            ],
        }
    }

    fn validate(&self) -> Result<(), EnvError> {
        if self.size < 2 {
            return Err(EnvError::BadConfig("grid size must be at least 2".into()));
        }
        if self.max_steps < 1 {
            return Err(EnvError::BadConfig("max_steps must be at least 1".into()));
        }
        self.goal_reward.validate()?;
        for spec in &self.step_rewards {
            spec.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacmanState {
    pub agent: GridPos,
    pub goal: GridPos,
    pub steps_taken: u32,
}

#[derive(Debug, Clone)]
pub struct Pacman {
    cfg: PacmanConfig,
}

impl Pacman {
    pub fn new(cfg: PacmanConfig) -> Result<Self, EnvError> {
        cfg.validate()?;
        Ok(Self { cfg })
    }

    pub fn config(&self) -> &PacmanConfig {
        &self.cfg
    }

    pub fn reset<R: Rng>(&self, rng: &mut R) -> PacmanState {
        let n = self.cfg.size;
        let goal = match self.cfg.goal_mode {
            GoalMode::FixedBottomRight => GridPos::new(n - 1, n - 1),
            GoalMode::RandomPerEpisode => {
                // Uniform over the n^2 - 1 cells that are not the start.
                let idx = rng.gen_range(1..n * n);
                GridPos::new(idx / n, idx % n)
            }
        };
        PacmanState {
            agent: GridPos::new(0, 0),
            goal,
            steps_taken: 0,
        }
    }

    pub fn is_terminal(&self, state: &PacmanState) -> bool {
        state.agent == state.goal || state.steps_taken >= self.cfg.max_steps
    }

    pub fn step<R: Rng>(
        &self,
        state: &PacmanState,
        action: Action,
        rng: &mut R,
    ) -> Result<Step<PacmanState>, EnvError> {
        if self.is_terminal(state) {
            return Err(EnvError::EpisodeOver);
        }
        let n = self.cfg.size as i64;
        let (dr, dc) = action.delta();
        let row = state.agent.row as i64 + dr;
        let col = state.agent.col as i64 + dc;
        let agent = if row < 0 || row >= n || col < 0 || col >= n {
            state.agent // edge collision: no movement
        } else {
            GridPos::new(row as usize, col as usize)
        };

        let steps_taken = state.steps_taken + 1;
        let next = PacmanState {
            agent,
            goal: state.goal,
            steps_taken,
        };

        if agent == state.goal {
            let reward = self.cfg.goal_reward.sample(rng);
            return Ok(Step {
                next,
                reward,
                terminal: true,
                outcome: Outcome::Goal,
            });
        }
        let reward = self.cfg.step_rewards[action.index()].sample(rng);
        if steps_taken >= self.cfg.max_steps {
            Ok(Step {
                next,
                reward,
                terminal: true,
                outcome: Outcome::Timeout,
            })
        } else {
            Ok(Step {
                next,
                reward,
                terminal: false,
                outcome: Outcome::Step,
            })
        }
    }

    /// One-hot agent position followed by one-hot goal position.
    pub fn encode(&self, state: &PacmanState) -> Vec<f64> {
        let n = self.cfg.size;
        let cells = n * n;
        let mut enc = vec![0.0; 2 * cells];
        enc[state.agent.row * n + state.agent.col] = 1.0;
        enc[cells + state.goal.row * n + state.goal.col] = 1.0;
        enc
    }

    pub fn obs_dim(&self) -> usize {
        2 * self.cfg.size * self.cfg.size
    }

    /// Discrete identifier of the full (agent, goal) configuration.
    pub fn state_key(&self, state: &PacmanState) -> u64 {
        let n = self.cfg.size as u64;
        let agent = state.agent.row as u64 * n + state.agent.col as u64;
        let goal = state.goal.row as u64 * n + state.goal.col as u64;
        agent * n * n + goal
    }

    /// Fewest moves from the agent to the goal (no obstacles, so Manhattan).
    pub fn min_steps(&self, state: &PacmanState) -> u32 {
        state.agent.manhattan(state.goal)
    }
}
