//! Leniency machinery: per-pair temperatures with fold-in decay, the
//! leniency value `l = 1 - exp(-K * T)`, the gate that forgives negative
//! temporal-difference updates while temperatures are high, running reward
//! statistics, and the lenient reward network (LRN) that regresses the
//! per-pair mean rewards through that gate.

use std::collections::HashMap;
use std::io::{self, Write};

use rand::Rng;
use thiserror::Error;

use crate::nn::{AdamState, Batch, DenseNet, NetError};

#[derive(Debug, Clone, Copy)]
pub struct LeniencyParams {
    /// Leniency decay constant K.
    pub k: f64,
    /// Temperature discount per decay.
    pub kappa: f64,
    /// Fold-in coefficient for the successor state's mean temperature.
    pub eta: f64,
    /// Temperature assigned to unseen pairs.
    pub max_temperature: f64,
}

impl Default for LeniencyParams {
    fn default() -> Self {
        Self {
            k: 2.0,
            kappa: 0.95,
            eta: 0.6,
            max_temperature: 1.0,
        }
    }
}

/// Leniency of a temperature: `1 - exp(-k * t)`, in `[0, 1)`.
pub fn leniency(temperature: f64, k: f64) -> f64 {
    1.0 - (-k * temperature).exp()
}

/// Direction of the uniform draw in the negative-update gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NegativeGate {
    /// Accept a negative update when `x > l`, i.e. with probability
    /// `1 - l`: high leniency forgives most negative updates.
    #[default]
    PassAboveLeniency,
    /// Accept a negative update when `x < l` (the inverted rule, kept
    /// selectable for comparison runs).
    PassBelowLeniency,
}

/// Whether a temporal-difference update should be applied: positive deltas
/// always pass; negative deltas pass with probability `1 - l` (under the
/// default gate direction) via the uniform draw `x`.
pub fn lenient_gate(delta: f64, l: f64, x: f64) -> bool {
    lenient_gate_with(delta, l, x, NegativeGate::PassAboveLeniency)
}

pub fn lenient_gate_with(delta: f64, l: f64, x: f64, mode: NegativeGate) -> bool {
    if delta > 0.0 {
        return true;
    }
    match mode {
        NegativeGate::PassAboveLeniency => x > l,
        NegativeGate::PassBelowLeniency => x < l,
    }
}

/// Per-(state, action) temperatures. Unseen pairs report the configured
/// maximum temperature.
#[derive(Debug, Clone)]
pub struct TemperatureTable {
    temps: HashMap<(u64, usize), f64>,
    n_actions: usize,
    max_temperature: f64,
}

impl TemperatureTable {
    pub fn new(n_actions: usize, max_temperature: f64) -> Self {
        Self {
            temps: HashMap::new(),
            n_actions,
            max_temperature,
        }
    }

    pub fn get(&self, state_key: u64, action: usize) -> f64 {
        *self
            .temps
            .get(&(state_key, action))
            .unwrap_or(&self.max_temperature)
    }

    pub fn set(&mut self, state_key: u64, action: usize, temperature: f64) {
        self.temps.insert((state_key, action), temperature);
    }

    /// Mean temperature over all actions of a state.
    pub fn mean_temperature(&self, state_key: u64) -> f64 {
        let total: f64 = (0..self.n_actions).map(|a| self.get(state_key, a)).sum();
        total / self.n_actions as f64
    }

    /// Decay the pair's temperature: terminal transitions use
    /// `T <- kappa * T`; otherwise the successor state's mean temperature is
    /// folded in first, `T <- kappa * ((1 - eta) * T + eta * mean_T(s'))`.
    /// Returns the stored new temperature.
    pub fn decay(
        &mut self,
        state_key: u64,
        action: usize,
        next_state_key: u64,
        terminal: bool,
        params: &LeniencyParams,
    ) -> f64 {
        let current = self.get(state_key, action);
        let new = if terminal {
            params.kappa * current
        } else {
            let folded = (1.0 - params.eta) * current
                + params.eta * self.mean_temperature(next_state_key);
            params.kappa * folded
        };
        self.temps.insert((state_key, action), new);
        new
    }

    pub fn len(&self) -> usize {
        self.temps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.temps.is_empty()
    }
}

/// Running per-(state, action) reward counts and means.
#[derive(Debug, Clone, Default)]
pub struct RewardStats {
    stats: HashMap<(u64, usize), (u64, f64)>,
}

impl RewardStats {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fold one observed reward into the running mean; returns the updated
    /// mean.
    pub fn record(&mut self, state_key: u64, action: usize, reward: f64) -> f64 {
        debug_assert!(reward.is_finite());
        let entry = self.stats.entry((state_key, action)).or_insert((0, 0.0));
        entry.0 += 1;
        entry.1 += (reward - entry.1) / entry.0 as f64;
        entry.1
    }

    pub fn mean(&self, state_key: u64, action: usize) -> Option<f64> {
        self.stats.get(&(state_key, action)).map(|&(_, m)| m)
    }

    pub fn count(&self, state_key: u64, action: usize) -> u64 {
        self.stats.get(&(state_key, action)).map_or(0, |&(n, _)| n)
    }
}

#[derive(Debug, Error)]
pub enum LenientError {
    #[error("no reward statistics for state {state_key} action {action}")]
    MissingStats { state_key: u64, action: usize },
    #[error(transparent)]
    Net(#[from] NetError),
}

/// One LRN training item: the discrete key for table lookups plus the
/// encoded state the network consumes.
#[derive(Debug, Clone, Copy)]
pub struct LrnSample<'a> {
    pub state_key: u64,
    pub state: &'a [f64],
    pub action: usize,
}

/// Lenient reward network: estimates the expected immediate reward per
/// action and is trained toward the running reward means, with negative
/// corrections gated by leniency.
#[derive(Debug)]
pub struct LenientRewardNet {
    net: DenseNet,
    adam: AdamState,
}

impl LenientRewardNet {
    pub fn new<R: Rng>(layer_sizes: &[usize], lr: f64, rng: &mut R) -> Result<Self, NetError> {
        let net = DenseNet::init(layer_sizes, rng)?;
        let adam = AdamState::new(&net, lr);
        Ok(Self { net, adam })
    }

    pub fn net(&self) -> &DenseNet {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut DenseNet {
        &mut self.net
    }

    /// Estimated reward of one (state, action); a pure forward pass.
    pub fn predict(&self, state: &[f64], action: usize) -> f64 {
        self.net.forward(state)[action]
    }

    pub fn predict_batch(&self, states: &[&[f64]]) -> Vec<Vec<f64>> {
        self.net.forward_batch(states)
    }

    /// One gated regression step toward the running reward means. For each
    /// item, `delta = mean_reward(s, a) - prediction`; the item joins the
    /// loss only if the gate passes under its current leniency. Temperatures
    /// are not decayed here. Returns the pre-update loss over the gated
    /// items (0 when none pass).
    pub fn update<R: Rng>(
        &mut self,
        items: &[LrnSample],
        stats: &RewardStats,
        temps: &TemperatureTable,
        params: &LeniencyParams,
        gate: NegativeGate,
        rng: &mut R,
    ) -> Result<f64, LenientError> {
        if items.is_empty() {
            return Ok(0.0);
        }
        let states: Vec<&[f64]> = items.iter().map(|s| s.state).collect();
        let rows = self.net.forward_batch(&states);

        let mut batch = Batch {
            inputs: Vec::new(),
            actions: Vec::new(),
            targets: Vec::new(),
        };
        for (item, row) in items.iter().zip(&rows) {
            let mean = stats
                .mean(item.state_key, item.action)
                .ok_or(LenientError::MissingStats {
                    state_key: item.state_key,
                    action: item.action,
                })?;
            let delta = mean - row[item.action];
            let l = leniency(temps.get(item.state_key, item.action), params.k);
            let x: f64 = rng.gen();
            if lenient_gate_with(delta, l, x, gate) {
                batch.inputs.push(item.state);
                batch.actions.push(item.action);
                batch.targets.push(mean);
            }
        }
        if batch.is_empty() {
            return Ok(0.0);
        }
        Ok(self.net.train_batch(&batch, &mut self.adam)?)
    }
}

/// Debug dump: one CSV row per known (state, action) pair with temperature,
/// leniency, mean reward, and the LRN estimate.
pub fn dump_leniency_csv<W: Write>(
    mut w: W,
    pairs: &[(u64, usize, &[f64])],
    temps: &TemperatureTable,
    stats: &RewardStats,
    params: &LeniencyParams,
    lrn: &LenientRewardNet,
) -> io::Result<()> {
    writeln!(w, "state_key,action,temperature,leniency,mean_reward,estimate")?;
    for &(key, action, enc) in pairs {
        let t = temps.get(key, action);
        writeln!(
            w,
            "{},{},{},{},{},{}",
            key,
            action,
            t,
            leniency(t, params.k),
            stats.mean(key, action).unwrap_or(f64::NAN),
            lrn.predict(enc, action)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::RewardSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn leniency_values() {
        assert_eq!(leniency(0.0, 2.0), 0.0);
        assert!((leniency(1.0, 2.0) - 0.8647).abs() < 1e-4);
        // Strictly increasing in the temperature.
        let mut prev = -1.0;
        for i in 0..100 {
            let l = leniency(i as f64 / 25.0, 2.0);
            assert!(l > prev);
            assert!((0.0..1.0).contains(&l));
            prev = l;
        }
    }

    #[test]
    fn temperature_decay_terminal_and_fold() {
        let params = LeniencyParams::default();
        let mut table = TemperatureTable::new(4, 1.0);
        // Terminal: plain kappa discount.
        let t = table.decay(0, 0, 99, true, &params);
        assert!((t - 0.95).abs() < 1e-12);

        // Non-terminal with mean successor temperature 0.5:
        // 0.95 * (0.4 * 1.0 + 0.6 * 0.5) = 0.665.
        let mut table = TemperatureTable::new(4, 1.0);
        for a in 0..4 {
            table.temps.insert((7, a), 0.5);
        }
        let t = table.decay(0, 0, 7, false, &params);
        assert!((t - 0.665).abs() < 1e-9);
    }

    #[test]
    fn zero_eta_matches_terminal_rule() {
        let params = LeniencyParams {
            eta: 0.0,
            ..Default::default()
        };
        let mut table = TemperatureTable::new(4, 1.0);
        table.temps.insert((3, 1), 0.8);
        let t = table.decay(3, 1, 42, false, &params);
        assert!((t - 0.95 * 0.8).abs() < 1e-12);
    }

    #[test]
    fn temperatures_stay_in_range() {
        let params = LeniencyParams::default();
        let mut table = TemperatureTable::new(4, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..5_000 {
            let s = rng.gen_range(0..20u64);
            let a = rng.gen_range(0..4usize);
            let s2 = rng.gen_range(0..20u64);
            let t = table.decay(s, a, s2, rng.gen_bool(0.2), &params);
            assert!((0.0..=1.0).contains(&t));
        }
        // Terminal-only decay never increases a temperature.
        let mut t = 1.0;
        for _ in 0..100 {
            let next = table.decay(500, 0, 501, true, &params);
            assert!(next <= t + 1e-15);
            t = next;
        }
    }

    #[test]
    fn gate_passes_positive_and_respects_leniency() {
        assert!(lenient_gate(0.5, 0.99, 0.0));
        // No leniency left: every draw passes.
        for i in 0..100 {
            assert!(lenient_gate(-0.5, 0.0, i as f64 / 100.0 + 1e-9));
        }
        // l = 0.9: negative updates pass about 10% of the time.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let draws = 10_000;
        let passed = (0..draws)
            .filter(|_| lenient_gate(-1.0, 0.9, rng.gen()))
            .count();
        let freq = passed as f64 / draws as f64;
        assert!((freq - 0.10).abs() < 0.01, "gate frequency {freq}");
    }

    #[test]
    fn inverted_gate_flips_the_draw() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let draws = 10_000;
        let passed = (0..draws)
            .filter(|_| lenient_gate_with(-1.0, 0.9, rng.gen(), NegativeGate::PassBelowLeniency))
            .count();
        let freq = passed as f64 / draws as f64;
        assert!((freq - 0.90).abs() < 0.01, "inverted gate frequency {freq}");
    }

    #[test]
    fn reward_stats_running_mean() {
        let mut stats = RewardStats::new();
        assert_eq!(stats.mean(0, 0), None);
        stats.record(0, 0, -30.0);
        let m = stats.record(0, 0, 40.0);
        assert_eq!(m, 5.0);
        assert_eq!(stats.count(0, 0), 2);

        stats.record(1, 2, 3.5);
        assert_eq!(stats.mean(1, 2), Some(3.5));
    }

    #[test]
    fn reward_stats_match_brute_force_mean() {
        let mut stats = RewardStats::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rewards: Vec<f64> =
            (0..5_000).map(|_| rng.gen_range(-50.0_f64..50.0).round()).collect();
        for &r in &rewards {
            stats.record(9, 1, r);
        }
        let brute = rewards.iter().sum::<f64>() / rewards.len() as f64;
        assert!((stats.mean(9, 1).unwrap() - brute).abs() < 1e-9);
    }

    #[test]
    fn reward_stats_stochastic_mean_is_46() {
        let spec = RewardSpec::Choice(vec![(10.0, 0.6), (100.0, 0.4)]);
        let mut stats = RewardStats::new();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10_000 {
            stats.record(0, 0, spec.sample(&mut rng));
        }
        let mean = stats.mean(0, 0).unwrap();
        assert!((mean - 46.0).abs() < 1.0, "mean {mean}");
    }

    #[test]
    fn lrn_converges_to_means_with_leniency_off() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut lrn = LenientRewardNet::new(&[4, 32, 32, 2], 1e-2, &mut rng).unwrap();
        let mut stats = RewardStats::new();
        // Four one-hot states with two actions each, fixed target rewards.
        let targets = [(0usize, 0usize, 7.0), (1, 1, -3.0), (2, 0, 0.5), (3, 1, 12.0)];
        for &(s, a, r) in &targets {
            stats.record(s as u64, a, r);
        }
        // Zero temperature everywhere: the gate always passes.
        let temps = TemperatureTable::new(2, 0.0);
        let params = LeniencyParams::default();

        let encs: Vec<Vec<f64>> = (0..4)
            .map(|s| (0..4).map(|j| if j == s { 1.0 } else { 0.0 }).collect())
            .collect();
        let items: Vec<LrnSample> = targets
            .iter()
            .map(|&(s, a, _)| LrnSample {
                state_key: s as u64,
                state: &encs[s],
                action: a,
            })
            .collect();
        for _ in 0..2_000 {
            lrn.update(&items, &stats, &temps, &params, NegativeGate::default(), &mut rng)
                .unwrap();
        }
        for &(s, a, r) in &targets {
            let p = lrn.predict(&encs[s], a);
            assert!((p - r).abs() < 0.1, "state {s} action {a}: {p} vs {r}");
        }
    }

    #[test]
    fn untrained_lrn_is_zero_on_zero_input_and_pure() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let lrn = LenientRewardNet::new(&[3, 16, 2], 1e-3, &mut rng).unwrap();
        assert_eq!(lrn.predict(&[0.0, 0.0, 0.0], 0), 0.0);
        let a = lrn.predict(&[1.0, 0.0, 0.0], 1);
        let b = lrn.predict(&[1.0, 0.0, 0.0], 1);
        assert_eq!(a, b);
    }

    #[test]
    fn missing_stats_key_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut lrn = LenientRewardNet::new(&[2, 8, 2], 1e-3, &mut rng).unwrap();
        let stats = RewardStats::new();
        let temps = TemperatureTable::new(2, 1.0);
        let enc = [1.0, 0.0];
        let items = [LrnSample {
            state_key: 5,
            state: &enc,
            action: 0,
        }];
        assert!(matches!(
            lrn.update(
                &items,
                &stats,
                &temps,
                &LeniencyParams::default(),
                NegativeGate::default(),
                &mut rng
            ),
            Err(LenientError::MissingStats { state_key: 5, action: 0 })
        ));
    }

    #[test]
    fn fresh_pair_admits_negative_updates_at_expected_rate() {
        // T = 1, K = 2: leniency 0.8647, so negative deltas should train
        // with frequency about 0.135.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut lrn = LenientRewardNet::new(&[2, 8, 1], 0.0, &mut rng).unwrap();
        let mut stats = RewardStats::new();
        stats.record(0, 0, -5.0); // mean below the ~0 initial prediction
        let temps = TemperatureTable::new(1, 1.0);
        let params = LeniencyParams::default();
        let enc = [1.0, 0.0];
        let items = [LrnSample {
            state_key: 0,
            state: &enc,
            action: 0,
        }];
        let trials = 10_000;
        let mut included = 0;
        for _ in 0..trials {
            // lr = 0 keeps the prediction fixed; a nonzero loss marks an
            // included item.
            let loss = lrn
                .update(&items, &stats, &temps, &params, NegativeGate::default(), &mut rng)
                .unwrap();
            if loss > 0.0 {
                included += 1;
            }
        }
        let freq = included as f64 / trials as f64;
        assert!((freq - 0.1353).abs() < 0.01, "inclusion frequency {freq}");
    }

    #[test]
    fn positive_delta_always_included() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut lrn = LenientRewardNet::new(&[2, 8, 1], 0.0, &mut rng).unwrap();
        let mut stats = RewardStats::new();
        stats.record(0, 0, 100.0); // far above the initial prediction
        let temps = TemperatureTable::new(1, 1.0); // maximum leniency
        let params = LeniencyParams::default();
        let enc = [1.0, 0.0];
        let items = [LrnSample {
            state_key: 0,
            state: &enc,
            action: 0,
        }];
        for _ in 0..100 {
            let loss = lrn
                .update(&items, &stats, &temps, &params, NegativeGate::default(), &mut rng)
                .unwrap();
            assert!(loss > 0.0);
        }
    }

    #[test]
    fn leniency_dump_has_expected_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let lrn = LenientRewardNet::new(&[2, 4, 2], 1e-3, &mut rng).unwrap();
        let mut stats = RewardStats::new();
        stats.record(0, 1, 4.0);
        let temps = TemperatureTable::new(2, 1.0);
        let enc = [1.0, 0.0];
        let mut buf = Vec::new();
        dump_leniency_csv(
            &mut buf,
            &[(0, 1, &enc)],
            &temps,
            &stats,
            &LeniencyParams::default(),
            &lrn,
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "state_key,action,temperature,leniency,mean_reward,estimate"
        );
        assert!(lines.next().unwrap().starts_with("0,1,1,0.86466"));
    }
}
