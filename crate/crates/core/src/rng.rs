//! Seeded generators, one independent family per purpose, so that a pool
//! generated with seed `s` is never sampled by a stream that replays its
//! construction.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Pool = 1,
    Corpus = 2,
    Training = 3,
    Sampling = 4,
    Trials = 5,
    Bootstrap = 6,
}

/// ChaCha8 keyed by `(seed, domain)`, on stream `index`.
pub fn derived_rng(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(domain as u64).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}
