//! Two-predator cooperative pursuit game.
//!
//! Two agents move simultaneously on a walled grid and must enter a goal
//! cell together. Entering a goal together ends the episode with that goal's
//! reward; entering a goal alone is a miscoordination: the lone entrant is
//! bounced back to its previous cell and the team receives -1. The bundled
//! map has a suboptimal goal `S` near the starts and an optimal goal `G`
//! behind a dividing wall.

use std::collections::VecDeque;

use rand::Rng;

use super::{Action, EnvError, GridPos, MapError, Outcome, RewardSpec, Step};

/// Bundled map: 7x5 with a center wall pierced at the goal rows.
pub const DEFAULT_MAP: &str = include_str!("../../maps/default.map");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Floor,
    Wall,
    GoalS,
    GoalG,
    Start1,
    Start2,
}

/// Parsed ASCII map. Start and goal cells are walkable floor.
#[derive(Debug, Clone)]
pub struct Layout {
    height: usize,
    width: usize,
    cells: Vec<Cell>,
    starts: [GridPos; 2],
    goal_s: GridPos,
    goal_g: GridPos,
}

impl Layout {
    /// Parse a map from its ASCII form: '#' wall, '.' floor, 'S'/'G' goals,
    /// '1'/'2' agent starts. Rows are newline-separated and must form a
    /// rectangle with exactly one of each marker.
    pub fn parse(text: &str) -> Result<Layout, MapError> {
        let rows: Vec<&str> = text
            .lines()
            .map(|l| l.trim_end_matches('\r'))
            .filter(|l| !l.is_empty())
            .collect();
        if rows.is_empty() {
            return Err(MapError::Empty);
        }
        let width = rows[0].chars().count();
        let height = rows.len();
        if width == 0 {
            return Err(MapError::Empty);
        }

        let mut cells = Vec::with_capacity(width * height);
        let mut start1 = None;
        let mut start2 = None;
        let mut goal_s = None;
        let mut goal_g = None;
        for (r, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(MapError::Ragged { row: r });
            }
            for (c, glyph) in row.chars().enumerate() {
                let pos = GridPos::new(r, c);
                let cell = match glyph {
                    '#' => Cell::Wall,
                    '.' => Cell::Floor,
                    'S' => {
                        if goal_s.replace(pos).is_some() {
                            return Err(MapError::DuplicateMarker('S'));
                        }
                        Cell::GoalS
                    }
                    'G' => {
                        if goal_g.replace(pos).is_some() {
                            return Err(MapError::DuplicateMarker('G'));
                        }
                        Cell::GoalG
                    }
                    '1' => {
                        if start1.replace(pos).is_some() {
                            return Err(MapError::DuplicateMarker('1'));
                        }
                        Cell::Start1
                    }
                    '2' => {
                        if start2.replace(pos).is_some() {
                            return Err(MapError::DuplicateMarker('2'));
                        }
                        Cell::Start2
                    }
                    other => {
                        return Err(MapError::BadGlyph {
                            glyph: other,
                            row: r,
                            col: c,
                        })
                    }
                };
                cells.push(cell);
            }
        }

        let layout = Layout {
            height,
            width,
            cells,
            starts: [
                start1.ok_or(MapError::MissingMarker('1'))?,
                start2.ok_or(MapError::MissingMarker('2'))?,
            ],
            goal_s: goal_s.ok_or(MapError::MissingMarker('S'))?,
            goal_g: goal_g.ok_or(MapError::MissingMarker('G'))?,
        };

        // Each start must reach at least one goal through the floor graph.
        for (i, &start) in layout.starts.iter().enumerate() {
            let dist = layout.bfs_distances(start);
            let reachable = dist[layout.index(layout.goal_s)].is_some()
                || dist[layout.index(layout.goal_g)].is_some();
            if !reachable {
                return Err(MapError::UnreachableGoal { start: i + 1 });
            }
        }
        Ok(layout)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn starts(&self) -> [GridPos; 2] {
        self.starts
    }

    pub fn goal_s(&self) -> GridPos {
        self.goal_s
    }

    pub fn goal_g(&self) -> GridPos {
        self.goal_g
    }

    pub fn cell(&self, pos: GridPos) -> Cell {
        self.cells[self.index(pos)]
    }

    pub fn index(&self, pos: GridPos) -> usize {
        pos.row * self.width + pos.col
    }

    pub fn is_wall(&self, pos: GridPos) -> bool {
        self.cell(pos) == Cell::Wall
    }

    pub fn is_goal(&self, pos: GridPos) -> bool {
        pos == self.goal_s || pos == self.goal_g
    }

    /// Breadth-first distances over floor cells from `from`.
    pub fn bfs_distances(&self, from: GridPos) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.cells.len()];
        if self.is_wall(from) {
            return dist;
        }
        dist[self.index(from)] = Some(0);
        let mut queue = VecDeque::new();
        queue.push_back(from);
        while let Some(pos) = queue.pop_front() {
            let d = dist[self.index(pos)].unwrap();
            for action in Action::ALL {
                if let Some(next) = self.apply_move(pos, action) {
                    if next != pos && dist[self.index(next)].is_none() {
                        dist[self.index(next)] = Some(d + 1);
                        queue.push_back(next);
                    }
                }
            }
        }
        dist
    }

    /// Destination of a move, or `None`-free: edge and wall collisions
    /// return the original position.
    fn apply_move(&self, pos: GridPos, action: Action) -> Option<GridPos> {
        let (dr, dc) = action.delta();
        let row = pos.row as i64 + dr;
        let col = pos.col as i64 + dc;
        if row < 0 || row >= self.height as i64 || col < 0 || col >= self.width as i64 {
            return Some(pos);
        }
        let next = GridPos::new(row as usize, col as usize);
        if self.is_wall(next) {
            Some(pos)
        } else {
            Some(next)
        }
    }
}

/// Reward structure variant from the pursuit experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredatorVariant {
    /// S pays +10, G pays +80.
    Deterministic,
    /// S pays +10 w.p. 0.6 or +100 w.p. 0.4 (mean 46); G pays +80.
    Stochastic,
}

#[derive(Debug, Clone)]
pub struct PredatorConfig {
    pub layout: Layout,
    pub reward_s: RewardSpec,
    pub reward_g: RewardSpec,
    pub miscoordination_penalty: f64,
    pub nongoal_reward: f64,
    pub max_steps: u32,
}

impl PredatorConfig {
    pub fn new(layout: Layout, variant: PredatorVariant) -> Self {
        let reward_s = match variant {
            PredatorVariant::Deterministic => RewardSpec::Fixed(10.0),
            PredatorVariant::Stochastic => RewardSpec::Choice(vec![(10.0, 0.6), (100.0, 0.4)]),
        };
        Self {
            layout,
            reward_s,
            reward_g: RewardSpec::Fixed(80.0),
            miscoordination_penalty: -1.0,
            nongoal_reward: 0.0,
            max_steps: 200,
        }
    }

    pub fn default_map(variant: PredatorVariant) -> Self {
        let layout = Layout::parse(DEFAULT_MAP).expect("bundled map is valid");
        Self::new(layout, variant)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredatorState {
    pub agents: [GridPos; 2],
    pub steps_taken: u32,
}

#[derive(Debug, Clone)]
pub struct Predator {
    cfg: PredatorConfig,
}

impl Predator {
    pub fn new(cfg: PredatorConfig) -> Result<Self, EnvError> {
        cfg.reward_s.validate()?;
        cfg.reward_g.validate()?;
        if cfg.max_steps < 1 {
            return Err(EnvError::BadConfig("max_steps must be at least 1".into()));
        }
        Ok(Self { cfg })
    }

    pub fn config(&self) -> &PredatorConfig {
        &self.cfg
    }

    pub fn layout(&self) -> &Layout {
        &self.cfg.layout
    }

    /// Reset is deterministic: agents return to their start markers.
    pub fn reset(&self) -> PredatorState {
        PredatorState {
            agents: self.cfg.layout.starts(),
            steps_taken: 0,
        }
    }

    pub fn is_terminal(&self, state: &PredatorState) -> bool {
        let on_same_goal = state.agents[0] == state.agents[1]
            && self.cfg.layout.is_goal(state.agents[0]);
        on_same_goal || state.steps_taken >= self.cfg.max_steps
    }

    pub fn step<R: Rng>(
        &self,
        state: &PredatorState,
        joint: (Action, Action),
        rng: &mut R,
    ) -> Result<Step<PredatorState>, EnvError> {
        if self.is_terminal(state) {
            return Err(EnvError::EpisodeOver);
        }
        let layout = &self.cfg.layout;
        let prev = state.agents;
        let mut pos = [
            layout.apply_move(prev[0], joint.0).unwrap(),
            layout.apply_move(prev[1], joint.1).unwrap(),
        ];

        let steps_taken = state.steps_taken + 1;
        let reward;
        let mut outcome;
        let mut terminal = false;

        let on_goal = [layout.is_goal(pos[0]), layout.is_goal(pos[1])];
        if on_goal[0] && on_goal[1] && pos[0] == pos[1] {
            // Coordinated goal entry: episode ends with that goal's reward.
            let spec = if pos[0] == layout.goal_s() {
                &self.cfg.reward_s
            } else {
                &self.cfg.reward_g
            };
            reward = spec.sample(rng);
            outcome = Outcome::Goal;
            terminal = true;
        } else if on_goal[0] || on_goal[1] {
            // Lone goal entry: bounce every goal entrant back and penalize.
            for i in 0..2 {
                if on_goal[i] {
                    pos[i] = prev[i];
                }
            }
            if pos[0] == pos[1] {
                // The bounce landed on the other agent's destination;
                // revert the whole joint move.
                pos = prev;
            }
            reward = self.cfg.miscoordination_penalty;
            outcome = Outcome::Miscoordination;
        } else if pos[0] == pos[1] || (pos[0] == prev[1] && pos[1] == prev[0]) {
            // Converging on a non-goal cell or swapping: both stay put.
            pos = prev;
            reward = self.cfg.nongoal_reward;
            outcome = Outcome::Step;
        } else {
            reward = self.cfg.nongoal_reward;
            outcome = Outcome::Step;
        }

        // Hitting the step cap ends the episode; the move's reward stands.
        if !terminal && steps_taken >= self.cfg.max_steps {
            terminal = true;
            outcome = Outcome::Timeout;
        }

        Ok(Step {
            next: PredatorState {
                agents: pos,
                steps_taken,
            },
            reward,
            terminal,
            outcome,
        })
    }

    /// One-hot position of agent 1 followed by one-hot position of agent 2.
    pub fn encode(&self, state: &PredatorState) -> Vec<f64> {
        let cells = self.cfg.layout.width() * self.cfg.layout.height();
        let mut enc = vec![0.0; 2 * cells];
        enc[self.cfg.layout.index(state.agents[0])] = 1.0;
        enc[cells + self.cfg.layout.index(state.agents[1])] = 1.0;
        enc
    }

    pub fn obs_dim(&self) -> usize {
        2 * self.cfg.layout.width() * self.cfg.layout.height()
    }

    pub fn state_key(&self, state: &PredatorState) -> u64 {
        let cells = (self.cfg.layout.width() * self.cfg.layout.height()) as u64;
        self.cfg.layout.index(state.agents[0]) as u64 * cells
            + self.cfg.layout.index(state.agents[1]) as u64
    }

    /// Steps for the slower agent to reach the nearest goal both can reach.
    pub fn min_steps(&self, state: &PredatorState) -> Result<u32, EnvError> {
        let layout = &self.cfg.layout;
        let d1 = layout.bfs_distances(state.agents[0]);
        let d2 = layout.bfs_distances(state.agents[1]);
        let mut best: Option<u32> = None;
        for goal in [layout.goal_s(), layout.goal_g()] {
            let idx = layout.index(goal);
            if let (Some(a), Some(b)) = (d1[idx], d2[idx]) {
                let joint = a.max(b);
                best = Some(best.map_or(joint, |cur| cur.min(joint)));
            }
        }
        best.ok_or(EnvError::UnreachableGoal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn det_env() -> Predator {
        Predator::new(PredatorConfig::default_map(PredatorVariant::Deterministic)).unwrap()
    }

    #[test]
    fn default_map_parses_and_places_agents() {
        let env = det_env();
        let s = env.reset();
        let layout = env.layout();
        assert_eq!(layout.width(), 7);
        assert_eq!(layout.height(), 5);
        assert_eq!(s.agents[0], GridPos::new(4, 0));
        assert_eq!(s.agents[1], GridPos::new(4, 6));
        assert_eq!(layout.goal_s(), GridPos::new(4, 3));
        assert_eq!(layout.goal_g(), GridPos::new(0, 3));
        assert_eq!(s.steps_taken, 0);
        assert_eq!(env.reset(), s);
    }

    #[test]
    fn custom_map_honors_markers() {
        let text = "G.#..\n..#.2\n1.S..\n";
        let layout = Layout::parse(text).unwrap();
        assert_eq!(layout.starts()[0], GridPos::new(2, 0));
        assert_eq!(layout.starts()[1], GridPos::new(1, 4));
        let env = Predator::new(PredatorConfig::new(layout, PredatorVariant::Deterministic))
            .unwrap();
        let s = env.reset();
        assert_eq!(s.agents, [GridPos::new(2, 0), GridPos::new(1, 4)]);
    }

    #[test]
    fn parse_errors_are_distinct() {
        assert!(matches!(Layout::parse(""), Err(MapError::Empty)));
        assert!(matches!(
            Layout::parse("1.S\n..\n..G2"),
            Err(MapError::Ragged { row: 1 })
        ));
        assert!(matches!(
            Layout::parse("1.S.2\n"),
            Err(MapError::MissingMarker('G'))
        ));
        assert!(matches!(
            Layout::parse("1.S.2\nG...G\n"),
            Err(MapError::DuplicateMarker('G'))
        ));
        assert!(matches!(
            Layout::parse("1#S#2\n.#G#.\n"),
            Err(MapError::UnreachableGoal { start: 1 })
        ));
        assert!(matches!(
            Layout::parse("1.S?2\n..G..\n"),
            Err(MapError::BadGlyph { glyph: '?', .. })
        ));
    }

    #[test]
    fn joint_goal_entry_pays_and_terminates() {
        let env = det_env();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // Place both agents adjacent to S and step in together.
        let s = PredatorState {
            agents: [GridPos::new(4, 2), GridPos::new(4, 4)],
            steps_taken: 0,
        };
        let step = env.step(&s, (Action::East, Action::West), &mut rng).unwrap();
        assert!(step.terminal);
        assert_eq!(step.outcome, Outcome::Goal);
        assert_eq!(step.reward, 10.0);

        let near_g = PredatorState {
            agents: [GridPos::new(0, 2), GridPos::new(0, 4)],
            steps_taken: 0,
        };
        let step = env
            .step(&near_g, (Action::East, Action::West), &mut rng)
            .unwrap();
        assert!(step.terminal);
        assert_eq!(step.reward, 80.0);
    }

    #[test]
    fn lone_goal_entry_is_miscoordination() {
        let env = det_env();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = PredatorState {
            agents: [GridPos::new(4, 2), GridPos::new(4, 5)],
            steps_taken: 0,
        };
        let step = env.step(&s, (Action::East, Action::West), &mut rng).unwrap();
        assert!(!step.terminal);
        assert_eq!(step.outcome, Outcome::Miscoordination);
        assert_eq!(step.reward, -1.0);
        // Lone entrant restored; the other agent's move stands.
        assert_eq!(step.next.agents[0], GridPos::new(4, 2));
        assert_eq!(step.next.agents[1], GridPos::new(4, 4));
    }

    #[test]
    fn plain_moves_pay_zero() {
        let env = det_env();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = env.reset();
        let step = env
            .step(&s, (Action::North, Action::North), &mut rng)
            .unwrap();
        assert_eq!(step.reward, 0.0);
        assert_eq!(step.outcome, Outcome::Step);
        assert_eq!(step.next.agents[0], GridPos::new(3, 0));
        assert_eq!(step.next.agents[1], GridPos::new(3, 6));
    }

    #[test]
    fn wall_collision_keeps_position() {
        let env = det_env();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // Agent 1 next to the center wall at row 2.
        let s = PredatorState {
            agents: [GridPos::new(2, 2), GridPos::new(2, 4)],
            steps_taken: 0,
        };
        let step = env.step(&s, (Action::East, Action::North), &mut rng).unwrap();
        assert_eq!(step.next.agents[0], GridPos::new(2, 2));
        assert_eq!(step.next.agents[1], GridPos::new(1, 4));
    }

    #[test]
    fn converging_and_swapping_agents_bounce() {
        let env = det_env();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        // Converge on (3, 1).
        let s = PredatorState {
            agents: [GridPos::new(3, 0), GridPos::new(3, 2)],
            steps_taken: 0,
        };
        let step = env.step(&s, (Action::East, Action::West), &mut rng).unwrap();
        assert_eq!(step.next.agents, s.agents);
        assert_eq!(step.reward, 0.0);

        // Swap attempt.
        let s = PredatorState {
            agents: [GridPos::new(3, 0), GridPos::new(3, 1)],
            steps_taken: 0,
        };
        let step = env.step(&s, (Action::East, Action::West), &mut rng).unwrap();
        assert_eq!(step.next.agents, s.agents);
    }

    #[test]
    fn goal_co_occupancy_invariant_holds() {
        let env = det_env();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let mut s = env.reset();
            loop {
                let joint = (
                    Action::ALL[rng.gen_range(0..4)],
                    Action::ALL[rng.gen_range(0..4)],
                );
                let step = env.step(&s, joint, &mut rng).unwrap();
                let a = step.next.agents;
                if a[0] == a[1] {
                    assert!(env.layout().is_goal(a[0]), "non-goal co-occupancy at {a:?}");
                }
                assert!(!env.layout().is_wall(a[0]) && !env.layout().is_wall(a[1]));
                if step.terminal {
                    break;
                }
                s = step.next;
            }
        }
    }

    #[test]
    fn stochastic_goal_s_mean_is_46() {
        let env =
            Predator::new(PredatorConfig::default_map(PredatorVariant::Stochastic)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = PredatorState {
            agents: [GridPos::new(4, 2), GridPos::new(4, 4)],
            steps_taken: 0,
        };
        let n = 10_000;
        let total: f64 = (0..n)
            .map(|_| {
                env.step(&s, (Action::East, Action::West), &mut rng)
                    .unwrap()
                    .reward
            })
            .sum();
        let mean = total / n as f64;
        assert!((mean - 46.0).abs() < 1.0, "stochastic S mean {mean}");
    }

    #[test]
    fn timeout_terminates() {
        let layout = Layout::parse(DEFAULT_MAP).unwrap();
        let mut cfg = PredatorConfig::new(layout, PredatorVariant::Deterministic);
        cfg.max_steps = 1;
        let env = Predator::new(cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = env.reset();
        let step = env
            .step(&s, (Action::North, Action::North), &mut rng)
            .unwrap();
        assert!(step.terminal);
        assert_eq!(step.outcome, Outcome::Timeout);
        assert!(env.step(&step.next, (Action::North, Action::North), &mut rng).is_err());
    }

    #[test]
    fn min_steps_matches_bfs_oracle() {
        // Independent brute-force BFS over the map graph.
        fn oracle(layout: &Layout, from: GridPos, to: GridPos) -> Option<u32> {
            let mut seen = vec![u32::MAX; layout.width() * layout.height()];
            seen[layout.index(from)] = 0;
            let mut frontier = vec![from];
            let mut depth = 0;
            while !frontier.is_empty() {
                if frontier.iter().any(|&p| p == to) {
                    return Some(depth);
                }
                depth += 1;
                let mut next = Vec::new();
                for p in frontier {
                    let candidates = [
                        (p.row.wrapping_sub(1), p.col),
                        (p.row + 1, p.col),
                        (p.row, p.col + 1),
                        (p.row, p.col.wrapping_sub(1)),
                    ];
                    for (r, c) in candidates {
                        if r >= layout.height() || c >= layout.width() {
                            continue;
                        }
                        let q = GridPos::new(r, c);
                        if !layout.is_wall(q) && seen[layout.index(q)] == u32::MAX {
                            seen[layout.index(q)] = depth;
                            next.push(q);
                        }
                    }
                }
                frontier = next;
            }
            None
        }

        let env = det_env();
        let layout = env.layout();
        let s = env.reset();
        let expected = [layout.goal_s(), layout.goal_g()]
            .into_iter()
            .filter_map(|g| {
                match (
                    oracle(layout, s.agents[0], g),
                    oracle(layout, s.agents[1], g),
                ) {
                    (Some(a), Some(b)) => Some(a.max(b)),
                    _ => None,
                }
            })
            .min()
            .unwrap();
        assert_eq!(env.min_steps(&s).unwrap(), expected);
        assert_eq!(expected, 3); // both starts are 3 moves from S

        // From cells adjacent to G the answer is 1.
        let near_g = PredatorState {
            agents: [GridPos::new(0, 2), GridPos::new(0, 4)],
            steps_taken: 0,
        };
        assert_eq!(env.min_steps(&near_g).unwrap(), 1);
    }

    #[test]
    fn min_steps_errors_without_common_goal() {
        // Start 1 can only reach S, start 2 only G: parse succeeds (each
        // start reaches a goal) but there is no goal common to both.
        let text = "1.S#2.G\n#######\n";
        let layout = Layout::parse(text).unwrap();
        let env = Predator::new(PredatorConfig::new(layout, PredatorVariant::Deterministic))
            .unwrap();
        let s = env.reset();
        assert!(matches!(env.min_steps(&s), Err(EnvError::UnreachableGoal)));
    }
}
