//! Counter-based seed derivation.
//!
//! Every random stream in the crate is a ChaCha8 generator keyed by the run
//! seed, with the stream id derived from a (tag, index) pair. Streams are
//! therefore independent of scheduling order and worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream tags. Distinct tags never share a stream for the same seed.
pub mod tag {
    pub const PATH: u64 = 1;
    pub const PARAMS: u64 = 2;
    pub const BOOTSTRAP: u64 = 3;
    pub const PERMUTATION: u64 = 4;
    pub const NULL: u64 = 5;
    pub const MEDIAN: u64 = 6;
    pub const MISSING: u64 = 7;
    pub const GRAPH: u64 = 8;
    pub const QUERY: u64 = 9;
    pub const FEATURES: u64 = 10;
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for substream `(tag, index)` of `seed`.
pub fn substream(seed: u64, tag: u64, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(splitmix(tag.wrapping_mul(0x1000_0000_01B3) ^ splitmix(index)));
    rng
}

/// Generator seeded directly from a 64-bit seed.
pub fn from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes an arbitrary list of words into one seed.
pub fn mix(words: &[u64]) -> u64 {
    words.iter().fold(0x243F_6A88_85A3_08D3, |acc, w| splitmix(acc ^ splitmix(*w)))
}
