//! Benchmark environments: a stochastic pacman-style gridworld and a
//! two-predator cooperative pursuit game.
//!
//! Both environments are deterministic state machines once the passed
//! random stream is fixed; all stochasticity (reward draws, goal placement)
//! flows through the `rng` argument.

use rand::Rng;
use thiserror::Error;

mod pacman;
mod predator;

pub use pacman::{GoalMode, Pacman, PacmanConfig, PacmanState};
pub use predator::{
    Cell, Layout, Predator, PredatorConfig, PredatorState, PredatorVariant, DEFAULT_MAP,
};

/// A cell coordinate, row-major with (0, 0) at the top-left.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridPos {
    pub row: usize,
    pub col: usize,
}

impl GridPos {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    pub fn manhattan(self, other: GridPos) -> u32 {
        (self.row.abs_diff(other.row) + self.col.abs_diff(other.col)) as u32
    }
}

/// The four movement actions, with stable integer codes 0..3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Action {
    North = 0,
    South = 1,
    East = 2,
    West = 3,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::North, Action::South, Action::East, Action::West];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }

    /// Row/column displacement; north decreases the row index.
    pub fn delta(self) -> (i64, i64) {
        match self {
            Action::North => (-1, 0),
            Action::South => (1, 0),
            Action::East => (0, 1),
            Action::West => (0, -1),
        }
    }
}

/// How a step ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Goal,
    Miscoordination,
    Step,
    Timeout,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Goal => "goal",
            Outcome::Miscoordination => "miscoordination",
            Outcome::Step => "step",
            Outcome::Timeout => "timeout",
        }
    }
}

/// Result of advancing an environment by one (joint) action.
///
/// The reward is the team reward: in the pursuit game both agents receive
/// this same scalar.
#[derive(Debug, Clone)]
pub struct Step<S> {
    pub next: S,
    pub reward: f64,
    pub terminal: bool,
    pub outcome: Outcome,
}

/// A reward source: either a fixed value or a discrete distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum RewardSpec {
    Fixed(f64),
    /// `(value, probability)` pairs; probabilities must sum to 1.
    Choice(Vec<(f64, f64)>),
}

impl RewardSpec {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            RewardSpec::Fixed(v) => *v,
            RewardSpec::Choice(outcomes) => {
                let x: f64 = rng.gen();
                let mut acc = 0.0;
                for &(value, p) in outcomes {
                    acc += p;
                    if x < acc {
                        return value;
                    }
                }
                // Guard against cumulative rounding at the top end.
                outcomes.last().map(|&(v, _)| v).unwrap_or(0.0)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            RewardSpec::Fixed(v) => *v,
            RewardSpec::Choice(outcomes) => outcomes.iter().map(|&(v, p)| v * p).sum(),
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if let RewardSpec::Choice(outcomes) = self {
            if outcomes.is_empty() {
                return Err(EnvError::BadConfig("empty reward distribution".into()));
            }
            let total: f64 = outcomes.iter().map(|&(_, p)| p).sum();
            if (total - 1.0).abs() > 1e-9 || outcomes.iter().any(|&(_, p)| p < 0.0) {
                return Err(EnvError::BadConfig(format!(
                    "reward probabilities must be nonnegative and sum to 1 (got {total})"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum EnvError {
    /// A step was requested on a terminal state.
    #[error("episode is over; reset the environment before stepping")]
    EpisodeOver,
    #[error("invalid environment configuration: {0}")]
    BadConfig(String),
    /// No goal is reachable by every agent from the given state.
    #[error("no goal reachable from the current state")]
    UnreachableGoal,
}

/// Errors from parsing an ASCII map.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum MapError {
    #[error("map is empty")]
    Empty,
    #[error("map rows have differing lengths (row {row})")]
    Ragged { row: usize },
    #[error("unknown map glyph '{glyph}' at row {row}, col {col}")]
    BadGlyph { glyph: char, row: usize, col: usize },
    #[error("map is missing marker '{0}'")]
    MissingMarker(char),
    #[error("map has more than one '{0}' marker")]
    DuplicateMarker(char),
    #[error("start {start} cannot reach any goal")]
    UnreachableGoal { start: usize },
}
