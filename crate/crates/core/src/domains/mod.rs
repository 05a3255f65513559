//! Benchmark instance families.

mod example;
mod generators;
mod mpp;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use example::{example_partition, example_two_agent};
pub use generators::{gen_coordint, gen_pyra, gen_random_mpp, random_small, CoordintParams, MppParams, SmallParams};
pub use mpp::{compile_mpp, CompiledMpp, MaintenanceTask, MppAgent, MppInstance, TaskRef};

/// Name recorded in instance metadata for the generator stream.
pub const RNG_NAME: &str = "chacha8-splitmix64";

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent generator for stream `index` of `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mixed = splitmix64(seed ^ splitmix64(index));
    ChaCha8Rng::seed_from_u64(mixed)
}
