//! Seed derivation and per-agent random streams.
//!
//! Every run gets its own seed via [`split_seed`] (a SplitMix64 step keyed by
//! the run index). Inside a run each agent owns four independent ChaCha8
//! streams, one per [`Purpose`], selected with `set_stream` so that adding an
//! agent or a new draw site never perturbs the other streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Derive an independent 64-bit seed for stream `index` of `master`.
pub fn split_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    TrainArrival = 0,
    TrainSample = 1,
    PredArrival = 2,
    PredSample = 3,
}

pub fn stream(seed: u64, agent: usize, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(agent as u64 * 4 + purpose as u64);
    rng
}
