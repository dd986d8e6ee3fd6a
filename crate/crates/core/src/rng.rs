//! Deterministic, splittable random streams.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 stream whose
//! key is derived from a master seed and a path of integers, e.g.
//! `(seed, replication, subsample)`. ChaCha is counter based, so a stream is
//! a pure function of its key and can be generated on any thread without
//! coordination.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Path tags used to keep the sub-streams of different consumers disjoint.
pub mod tag {
    pub const SUBSAMPLE: u64 = 0x5355_4253;
    pub const FEATURES: u64 = 0x4645_4154;
    pub const DATA: u64 = 0x4441_5441;
    pub const TEST: u64 = 0x5445_5354;
    pub const REPLICATION: u64 = 0x5245_504c;
    pub const SCHEME: u64 = 0x5343_484d;
}

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds `path` into `seed`, producing a 64-bit child seed.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    let mut state = seed;
    let mut out = splitmix64(&mut state);
    for &p in path {
        state ^= p.wrapping_mul(0xd6e8_feb8_6659_fd93).rotate_left(17);
        state = state.wrapping_add(out);
        out = splitmix64(&mut state);
    }
    out
}

/// The stream identified by `(seed, path...)`.
pub fn stream(seed: u64, path: &[u64]) -> StreamRng {
    let mut state = derive_seed(seed, path);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
