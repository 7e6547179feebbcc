//! Counter-based random streams.
//!
//! Every stream is a ChaCha8 generator keyed by a 64-bit key and selected by
//! a 64-bit stream index, so draws can be produced in any order (or in
//! parallel) and still be reproduced exactly from `(seed, index)`.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Draws per parallel work unit.
pub const BLOCK: usize = 1024;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a stream key from a seed and a list of salts.
pub fn derive_key(seed: u64, salts: &[u64]) -> u64 {
    salts
        .iter()
        .fold(splitmix64(seed), |acc, &s| splitmix64(acc ^ splitmix64(s)))
}

/// Generator for stream `index` under `key`.
pub fn stream(key: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}

/// Run `f` over consecutive blocks of `count` draws in parallel.
///
/// Block `b` covers draws `b*BLOCK..` and receives stream `b`, so the
/// returned vector (in block order) does not depend on scheduling.
pub fn par_blocks<T, F>(count: usize, key: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, Range<usize>) -> T + Sync,
{
    let blocks = count.div_ceil(BLOCK);
    (0..blocks)
        .into_par_iter()
        .map(|b| {
            let start = b * BLOCK;
            let end = (start + BLOCK).min(count);
            let mut rng = stream(key, b as u64);
            f(&mut rng, start..end)
        })
        .collect()
}
