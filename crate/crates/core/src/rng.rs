//! Deterministic per-sample random streams.
//!
//! A single 64-bit master seed generates one independent stream per sample
//! index. Stream `i` is derived purely from `(master, i)`, so sample `i` is
//! identical no matter how many workers run and in which order samples are
//! processed.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer, used as a mixing function.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The random stream handle handed to all samplers.
pub type Stream = ChaCha8Rng;

/// Derives the stream for sample `index` under `master`.
pub fn sample_stream(master: u64, index: u64) -> Stream {
    let mut seed = [0u8; 32];
    let a = splitmix64(master ^ splitmix64(index));
    let b = splitmix64(a);
    let c = splitmix64(b);
    let d = splitmix64(c);
    seed[0..8].copy_from_slice(&a.to_le_bytes());
    seed[8..16].copy_from_slice(&b.to_le_bytes());
    seed[16..24].copy_from_slice(&c.to_le_bytes());
    seed[24..32].copy_from_slice(&d.to_le_bytes());
    ChaCha8Rng::from_seed(seed)
}

/// A secondary stream, for consumers that need an auxiliary source (e.g.
/// bootstrap resampling) that must not perturb the primary sample stream.
pub fn aux_stream(master: u64, tag: u64) -> Stream {
    sample_stream(splitmix64(master ^ 0x5bf0_3635_dead_beef), tag)
}
