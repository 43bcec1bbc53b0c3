//! Seeded random substreams.
//!
//! Every consumer of randomness derives its own ChaCha stream from an explicit
//! seed and a key, so independent units (frames, subjects, rounds) never share
//! generator state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Generator for substream `key` of `seed`.
pub fn substream(seed: u64, key: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(key);
    rng
}

/// SplitMix64 finalizer applied to a pair of words.
pub fn mix64(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(0x9e37_79b9_7f4a_7c15).rotate_left(17);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a, used to turn subject identifiers into stream keys.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Stream key for one frame of one subject.
pub fn frame_key(subject_id: &str, frame: usize) -> u64 {
    mix64(fnv1a(subject_id.as_bytes()), frame as u64)
}
