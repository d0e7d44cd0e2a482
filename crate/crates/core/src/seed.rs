//! Deterministic seed derivation.
//!
//! Every random stream in the crate is keyed by a 64-bit seed obtained by
//! chaining the SplitMix64 finalizer over `(master, stream, index)`:
//!
//! ```text
//! derive(master, stream, index) = mix(mix(mix(master) ^ stream) ^ index)
//! mix(z): z += 0x9E3779B97F4A7C15
//!         z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//!         z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//!         z ^ (z >> 31)
//! ```
//!
//! All multiplications wrap. Because seeds depend only on indices, a
//! trial or particle produces the same numbers whichever worker runs it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The random generator used throughout the crate.
pub type SimRng = ChaCha8Rng;

/// Stream identifiers used when deriving seeds.
pub mod stream {
    /// Hidden-state noise of a simulated path.
    pub const HIDDEN: u64 = 0x01;
    /// Observation noise of a simulated path.
    pub const OBSERVATION: u64 = 0x02;
    /// Per-particle streams of a Monte-Carlo estimator.
    pub const PARTICLE: u64 = 0x03;
    /// Data path of an experiment trial.
    pub const PATH: u64 = 0x10;
    /// Estimator seed for the k-th evaluation parameter: `PARTICLES + k`.
    pub const PARTICLES: u64 = 0x100;
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
pub fn derive(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ stream) ^ index)
}

pub fn rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}
