use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic generator for `(seed, stream)`. Distinct streams of the same
/// seed never overlap, so independent draws (weights, features, masks, noise)
/// do not perturb each other when one of them changes size.
pub fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) mod streams {
    pub const WEIGHTS: u64 = 1;
    pub const FEATURES: u64 = 2;
    pub const MASK: u64 = 3;
    pub const NOISE: u64 = 4;
    pub const ADJACENCY: u64 = 5;
    pub const ROW_INR: u64 = 6;
    pub const COL_INR: u64 = 7;
    pub const DMF: u64 = 8;
    pub const NTK: u64 = 9;
}
