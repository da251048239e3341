//! Derivation of independent RNG streams from a master seed.
//!
//! Every random draw in the pipeline comes from a stream keyed by the master
//! seed plus the indices of the unit of work, so results do not depend on
//! execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream tags. Keep the values stable: they are part of the reproducibility contract.
#[derive(Clone, Copy, Debug)]
#[repr(u64)]
pub enum Stream {
    SlotNoise = 1,
    Prediction = 2,
    Resampling = 3,
    PatternInit = 4,
    RandomPattern = 5,
    Restart = 6,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes the master seed, a stream tag and a list of indices into one 64-bit seed.
pub fn derive(master: u64, stream: Stream, indices: &[u64]) -> u64 {
    let mut h = splitmix64(master ^ (stream as u64).rotate_left(32));
    for &i in indices {
        h = splitmix64(h ^ i);
    }
    h
}

pub fn rng(master: u64, stream: Stream, indices: &[u64]) -> Rng {
    Rng::seed_from_u64(derive(master, stream, indices))
}
