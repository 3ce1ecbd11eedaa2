//! Deterministic random stream derivation.
//!
//! Every independent unit of Monte-Carlo work (a sweep cell, a trial, a
//! trajectory step) draws from its own ChaCha stream whose key is a pure
//! function of the master seed and the unit's coordinates. Results therefore
//! do not depend on how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream purposes. Keeping them distinct avoids accidental reuse of the
/// same stream for two different draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Orientation = 1,
    Realization = 2,
    Trajectory = 3,
    Step = 4,
    HmmTraining = 5,
    Noise = 6,
    Codebook = 7,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with a purpose and a list of coordinates.
pub fn derive_seed(master: u64, purpose: Purpose, coords: &[u64]) -> u64 {
    let mut h = splitmix64(master ^ splitmix64(purpose as u64));
    for &c in coords {
        h = splitmix64(h ^ splitmix64(c.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    h
}

pub fn stream(master: u64, purpose: Purpose, coords: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, purpose, coords))
}
