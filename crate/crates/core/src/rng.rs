//! Seeding scheme. Every random draw comes from a ChaCha8 generator keyed by
//! a 64-bit seed and a named stream id, so a trial is reproducible from
//! `(seed, stream)` alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_MASK: u64 = 1;
pub const STREAM_NOISE: u64 = 2;
pub const STREAM_BASIS: u64 = 3;
pub const STREAM_SPECTRUM: u64 = 4;
/// Ground-truth attempt `k` draws from stream `STREAM_TRUTH + k`.
pub const STREAM_TRUTH: u64 = 1 << 16;
/// Monte Carlo trial `t` draws from stream `STREAM_TRIAL + t`.
pub const STREAM_TRIAL: u64 = 1 << 32;

pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// SplitMix64 finaliser, used to spread master seeds over trials.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `trial` in sweep cell `cell`.
pub fn trial_seed(master: u64, cell: u64, trial: u64) -> u64 {
    mix(mix(master ^ mix(cell)) ^ trial)
}
