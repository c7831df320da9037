//! Seed-derived RNG substreams.
//!
//! Every random draw of a run comes from a `ChaCha8Rng` keyed by the run seed and
//! a domain tag, with the ChaCha stream id set to the item index (trial number,
//! interrogation window, drift step, ...). Trials can therefore be simulated in
//! any order, or in parallel, and still reproduce the same stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Domain {
    Trial = 1,
    Herald = 2,
    Drift = 3,
    Calibration = 4,
    Sweep = 5,
    Aux = 6,
}

pub fn substream(seed: u64, domain: Domain, index: u64) -> SimRng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(domain as u64).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

#[inline]
pub fn trial_rng(seed: u64, trial_index: u64) -> SimRng {
    substream(seed, Domain::Trial, trial_index)
}

/// A fresh seed for item `index` of `domain`, e.g. one sweep point.
pub fn derive_seed(seed: u64, domain: Domain, index: u64) -> u64 {
    use rand::Rng;
    substream(seed, domain, index).random()
}
