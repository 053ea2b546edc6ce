//! Seed lanes. Every random quantity is drawn from a ChaCha stream keyed by
//! `(seed, path index)` with a fixed stream id per purpose, so results do not
//! depend on thread scheduling or on which other quantities were drawn.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lane {
    Jumps = 0,
    Brownian = 1,
    BurnIn = 2,
    Parameters = 3,
    MonteCarlo = 4,
}

pub fn stream(seed: u64, path: u64, lane: Lane) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&path.to_le_bytes());
    key[16..24].copy_from_slice(b"mucogar1");
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(lane as u64);
    rng
}
