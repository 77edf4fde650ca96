//! Fast invariant and oracle battery behind the `check` CLI subcommand.
//! Each check re-derives its expected values independently of the code it
//! probes where that is possible (direct formula evaluation, brute-force
//! recomputation, statistical frequency tests).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agents::tabular::estimator_bias_probe;
use crate::env::{GoalMode, PacmanConfig};
use crate::harness::config::{AgentKind, EnvSpec, ExperimentConfig};
use crate::harness::runner::{render_episodes_csv, run};
use crate::lenient::{lenient_gate, leniency, LeniencyParams, RewardStats, TemperatureTable};
use crate::nn::{finite_diff_check, DenseNet};
use crate::replay::{schedule_weights, PrioritySchedule, SumTreeMemory, Transition};

pub struct CheckResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> CheckResult {
    CheckResult { name, pass, detail }
}

fn dummy_transition(key: u64) -> Transition {
    Transition {
        state: vec![key as f64],
        action: 0,
        reward: 0.0,
        next_state: vec![key as f64],
        terminal: true,
        state_key: key,
        next_state_key: key,
    }
}

fn check_schedule() -> CheckResult {
    let sched = PrioritySchedule::default();
    let w = schedule_weights(3, &sched);
    let expected = [1.2214, 1.2461, 1.2740];
    let values_ok = w
        .iter()
        .zip(expected)
        .all(|(a, b)| (a - b).abs() < 1e-3);
    let long = schedule_weights(10_000, &sched);
    let monotone = long.windows(2).all(|p| p[1] >= p[0]);
    let clamped = long.iter().all(|&x| x.is_finite() && x <= sched.w_max + 1e-12);
    check(
        "schedule-weights",
        values_ok && monotone && clamped,
        format!("w(3) = {w:?}, monotone {monotone}, clamped {clamped}"),
    )
}

fn check_leniency() -> CheckResult {
    let l = leniency(1.0, 2.0);
    let l_ok = (l - 0.8647).abs() < 1e-4;

    // Pair at temperature 1 whose successor state's four actions all sit at
    // temperature 0.5: the fold gives 0.95 * (0.4 * 1.0 + 0.6 * 0.5) = 0.665.
    let params = LeniencyParams::default();
    let mut table = TemperatureTable::new(4, 1.0);
    for a in 0..4 {
        table.set(7, a, 0.5);
    }
    let folded = table.decay(0, 0, 7, false, &params);
    let fold_ok = (folded - 0.665).abs() < 1e-9;

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let draws = 10_000;
    let passed = (0..draws)
        .filter(|_| lenient_gate(-1.0, 0.9, rng.gen()))
        .count();
    let freq = passed as f64 / draws as f64;
    let gate_ok = (freq - 0.10).abs() < 0.01;

    check(
        "leniency-numerics",
        l_ok && fold_ok && gate_ok,
        format!("l(1;2) = {l:.4}, gate frequency {freq:.3}"),
    )
}

fn check_sum_tree() -> CheckResult {
    let mut mem = SumTreeMemory::new(256);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for i in 0..100_000u64 {
        if mem.is_empty() || rng.gen_bool(0.2) {
            mem.push_with_priority(dummy_transition(i), rng.gen_range(0.001..100.0));
        } else {
            let s = mem.sample(1, &mut rng).expect("non-empty");
            let _ = mem.update_priority(s[0].leaf, rng.gen_range(-100.0..100.0));
        }
        let root = mem.total_priority();
        let leaves = mem.leaf_sum();
        worst = worst.max((root - leaves).abs() / leaves.max(1.0));
    }
    check(
        "sum-tree-consistency",
        worst <= 1e-9,
        format!("max relative drift {worst:.3e} over 100000 mutations"),
    )
}

fn check_sampling() -> CheckResult {
    let mut mem = SumTreeMemory::new(8);
    mem.push_with_priority(dummy_transition(0), 1.0);
    mem.push_with_priority(dummy_transition(1), 3.0);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let draws = 10_000;
    let mut hits = 0;
    for _ in 0..draws {
        let s = mem.sample(1, &mut rng).expect("two items stored");
        if mem.transition(s[0].leaf).expect("fresh").state_key == 1 {
            hits += 1;
        }
    }
    let freq = hits as f64 / draws as f64;
    check(
        "proportional-sampling",
        (freq - 0.75).abs() < 0.02,
        format!("priorities [1,3]: high-priority frequency {freq:.3}"),
    )
}

fn check_gradients() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let mut detail = String::new();
    // Default architectures of both games: Q-nets and reward nets.
    for (obs_dim, hidden) in [
        (50usize, vec![128usize, 128]),
        (50, vec![64, 64]),
        (70, vec![128, 128]),
        (70, vec![64, 64]),
    ] {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(&hidden);
        sizes.push(4);
        let mut net = DenseNet::init(&sizes, &mut rng).expect("valid sizes");
        let mut input = vec![0.0; obs_dim];
        input[3] = 1.0;
        input[obs_dim / 2 + 1] = 1.0;
        let err = finite_diff_check(&mut net, &input, 2, 1.5, 1e-5);
        worst = worst.max(err);
        detail.push_str(&format!("{sizes:?}: {err:.2e}; "));
    }
    let deep_ok = worst < 1e-4;

    let mut linear = DenseNet::init(&[6, 1], &mut rng).expect("valid sizes");
    let input = [0.4, -0.2, 0.0, 1.0, 0.3, -0.9];
    let linear_err = finite_diff_check(&mut linear, &input, 0, 2.0, 1e-5);
    let linear_ok = linear_err < 1e-6;

    check(
        "gradient-check",
        deep_ok && linear_ok,
        format!("{detail}linear: {linear_err:.2e}"),
    )
}

fn check_reward_stats() -> CheckResult {
    let spec = crate::env::RewardSpec::Choice(vec![(10.0, 0.6), (100.0, 0.4)]);
    let mut stats = RewardStats::new();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10_000 {
        stats.record(0, 0, spec.sample(&mut rng));
    }
    let mean = stats.mean(0, 0).expect("recorded");
    check(
        "reward-stats-mean",
        (mean - 46.0).abs() < 1.0,
        format!("stochastic goal mean {mean:.2} (expected 46 +/- 1)"),
    )
}

fn check_estimator_bias() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let trials = 200;
    let (mut s, mut w, mut d) = (0.0, 0.0, 0.0);
    for _ in 0..trials {
        let (a, b, c) = estimator_bias_probe(&mut rng, 2_000, 0.1, 0.1);
        s += a;
        w += b;
        d += c;
    }
    s /= trials as f64;
    w /= trials as f64;
    d /= trials as f64;
    check(
        "estimator-bias-ordering",
        s > w && w > d && s > 0.0 && d < 0.0,
        format!("single {s:.4} > weighted {w:.4} > double {d:.4}"),
    )
}

fn check_determinism() -> CheckResult {
    let mut cfg = ExperimentConfig::new(
        EnvSpec::Pacman {
            size: 3,
            goal_mode: GoalMode::RandomPerEpisode,
            max_steps: Some(20),
        },
        AgentKind::Wddqn,
    );
    cfg.max_episodes = 3;
    cfg.agent.hidden = vec![8];
    cfg.agent.lrn_hidden = vec![8];
    cfg.agent.batch_size = 4;
    cfg.agent.replay_capacity = 64;
    let a = run(&cfg, 7, None).map(|r| render_episodes_csv(&r.records));
    let b = run(&cfg, 7, None).map(|r| render_episodes_csv(&r.records));
    match (a, b) {
        (Ok(a), Ok(b)) => check(
            "run-determinism",
            a == b,
            format!("two seeded micro runs: {} bytes each", a.len()),
        ),
        (a, b) => check("run-determinism", false, format!("run failed: {a:?} / {b:?}")),
    }
}

fn check_env_rewards() -> CheckResult {
    let mut cfg = PacmanConfig::new(2);
    cfg.goal_mode = GoalMode::FixedBottomRight;
    let env = crate::env::Pacman::new(cfg).expect("valid config");
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let state = crate::env::PacmanState {
        agent: crate::env::GridPos::new(0, 1),
        goal: crate::env::GridPos::new(1, 1),
        steps_taken: 0,
    };
    let n = 10_000;
    let total: f64 = (0..n)
        .map(|_| {
            env.step(&state, crate::env::Action::South, &mut rng)
                .expect("non-terminal")
                .reward
        })
        .sum();
    let mean = total / n as f64;
    check(
        "pacman-goal-reward-mean",
        (mean - 5.0).abs() < 0.5,
        format!("goal-entry mean {mean:.2} (expected 5 +/- 0.5)"),
    )
}

/// Run the whole battery; each result carries a pass flag and a one-line
/// detail string.
pub fn run_checks() -> Vec<CheckResult> {
    vec![
        check_schedule(),
        check_leniency(),
        check_sum_tree(),
        check_sampling(),
        check_gradients(),
        check_reward_stats(),
        check_estimator_bias(),
        check_env_rewards(),
        check_determinism(),
    ]
}
