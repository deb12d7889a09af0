//! Deterministic random streams.
//!
//! Every stochastic quantity is drawn from a ChaCha8 generator whose seed is
//! derived from the run's master seed and a path of indices (cell index,
//! shard, purpose tag). Results therefore do not depend on thread count or
//! execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream tags used by the scenarios so that distinct purposes never share
/// random numbers.
pub mod tags {
    pub const NF_CHANNEL: u64 = 0x4e46;
    pub const FF_CHANNEL: u64 = 0x4646;
    pub const CAPACITY: u64 = 0xca9a;
    pub const KL: u64 = 0x6b6c;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a master seed with a path of indices into one 64-bit seed.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &i| splitmix64(acc ^ splitmix64(i)))
}

pub fn substream(master: u64, path: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master, path))
}
