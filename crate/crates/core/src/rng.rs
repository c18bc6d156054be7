//! Seeded, portable random streams.
//!
//! All randomness flows through [`ChaCha8Rng`]. A child stream for a tuple of
//! indices (world index, iteration, episode, ...) is obtained by hashing the
//! parent seed together with the indices through SplitMix64 and using the
//! result as the ChaCha key; the last index also selects the ChaCha stream
//! word. Child streams depend only on `(seed, indices)`, never on the order in
//! which they are created, so parallel and serial consumers see identical bits.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a 64-bit seed from a parent seed and a path of indices.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &i| splitmix64(acc ^ splitmix64(i)))
}

/// Root stream for a seed.
pub fn root(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent child stream addressed by `path`.
pub fn child(seed: u64, path: &[u64]) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, path));
    rng.set_stream(path.last().copied().unwrap_or(0));
    rng
}
