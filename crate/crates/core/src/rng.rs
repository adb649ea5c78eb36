//! Seed derivation. Every random stream in the crate is a ChaCha8 generator
//! seeded from a master seed mixed with a purpose tag and an index, so results
//! do not depend on scheduling or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(tag)) ^ index)
}

pub fn stream(master: u64, tag: u64, index: u64) -> Rng {
    Rng::seed_from_u64(derive_seed(master, tag, index))
}

// Purpose tags.
pub const TAG_TRIAL: u64 = 1;
pub const TAG_TEST_SET: u64 = 2;
pub const TAG_SHUFFLE: u64 = 3;
pub const TAG_PERMUTATION: u64 = 4;
pub const TAG_TIEBREAK: u64 = 5;
pub const TAG_DOMAIN: u64 = 6;
