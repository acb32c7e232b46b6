//! Seed derivation for reproducible, order-independent random streams.
//!
//! Every random draw in the crate comes from a ChaCha stream keyed by a
//! 64-bit seed and selected by a stream index. ChaCha is counter based, so
//! stream `i` of seed `s` yields the same values no matter which other
//! streams were consumed first or on which thread.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed number `index` of `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix64(master ^ mix64(index.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

/// Stable child seed keyed by a label (FNV-1a of the label bytes).
pub fn derive_seed_for(master: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    derive_seed(master, h)
}

/// Generator for stream `stream` of `seed`.
pub fn stream(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
