//! Keyed random streams.
//!
//! Every random draw in the lab comes from a ChaCha8 stream whose key is a
//! hash of `(seed, ids...)`. Streams are therefore addressable by their
//! provenance (experiment seed, member, step, ...) and do not depend on
//! evaluation order or thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Stream-id namespaces. Keeping these distinct guarantees that e.g. closure
/// noise for member 3 never aliases the ES perturbation of population slot 3.
pub mod domain {
    pub const CLOSURE_NOISE: u64 = 0x4e4f_4953;
    pub const SPIN_UP: u64 = 0x5350_494e;
    pub const ES_PERTURB: u64 = 0x4553_5054;
    pub const MINIBATCH: u64 = 0x4241_5443;
    pub const AR1_DATA: u64 = 0x4152_3144;
    pub const AR1_MODEL: u64 = 0x4152_314d;
    pub const MONTE_CARLO: u64 = 0x4d43_4d43;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a seed and an arbitrary id path into a 256-bit ChaCha key.
pub fn derive_key(seed: u64, ids: &[u64]) -> [u8; 32] {
    let mut h = splitmix64(seed ^ 0x6a09_e667_f3bc_c908);
    for &id in ids {
        h = splitmix64(h ^ splitmix64(id.wrapping_add(0x3c6e_f372_fe94_f82b)));
    }
    let mut key = [0u8; 32];
    let mut lane = h;
    for chunk in key.chunks_exact_mut(8) {
        lane = splitmix64(lane);
        chunk.copy_from_slice(&lane.to_le_bytes());
    }
    key
}

/// A reproducible RNG addressed by `(seed, ids...)`.
pub fn stream(seed: u64, ids: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(derive_key(seed, ids))
}

/// Mix a seed with ids into a new 64-bit seed (for nested experiments).
pub fn sub_seed(seed: u64, ids: &[u64]) -> u64 {
    let k = derive_key(seed, ids);
    u64::from_le_bytes(k[..8].try_into().unwrap())
}

/// Fill `out` with independent standard normal draws.
pub fn fill_standard_normal<R: rand::Rng>(rng: &mut R, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
}

#[inline]
pub fn standard_normal<R: rand::Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}
