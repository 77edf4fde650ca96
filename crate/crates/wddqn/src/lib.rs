//! Multiagent reinforcement-learning lab built around weighted double deep
//! Q-networks (WDDQN) with a lenient reward network and a scheduled replay
//! strategy, together with tabular estimators, deep baselines, and two
//! cooperative gridworld benchmarks.

pub mod agents;
pub mod env;
pub mod harness;
pub mod lenient;
pub mod nn;
pub mod replay;

/// Derive a sub-stream seed from a run seed (splitmix64 finalizer), so each
/// component of a run gets an independent but reproducible random stream.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
