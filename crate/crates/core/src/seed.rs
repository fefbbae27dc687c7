//! Deterministic seed derivation for independent random streams.

/// SplitMix64 finaliser.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for item `index` of stream `stream` under run seed `base`.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    mix(mix(mix(base).wrapping_add(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15))).wrapping_add(index))
}

pub const TRAIN_EPISODES: u64 = 1;
pub const EVAL_EPISODES: u64 = 2;
pub const NETWORK_INIT: u64 = 3;
pub const TRAINER_RNG: u64 = 4;
pub const BEST_RESPONSE: u64 = 5;
pub const BASELINE: u64 = 6;
