//! Seeded random streams.
//!
//! Every stage draws from ChaCha8 (a counter-based generator) keyed by the
//! user seed, with a fixed stream id per stage, so stages never share
//! randomness and a seed reproduces an entire run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StageRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Generate = 1,
    Sparsify = 2,
    Select = 3,
    TailRate = 4,
    Net = 5,
    Probe = 6,
}

pub fn stream(seed: u64, which: Stream) -> StageRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
