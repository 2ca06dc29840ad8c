//! Deterministic random-input streams.
//!
//! Every sample is keyed by the tuple `(seed, level, replica, index)` and is
//! generated by its own counter-seeded ChaCha stream, so a sample's value
//! never depends on evaluation order, thread scheduling, or how many other
//! samples were drawn. Identical tuples give bit-identical draws; the
//! coupled fine/coarse solves of a level correction reuse one tuple on both
//! meshes.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

const SQRT3: f64 = 1.7320508075688772;

/// Finalizing avalanche mix (splitmix64 style).
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Root of all random input in one run.
#[derive(Clone, Copy, Debug)]
pub struct SampleStream {
    seed: u64,
}

impl SampleStream {
    /// Stream rooted at a user-visible seed.
    pub fn new(seed: u64) -> Self {
        SampleStream { seed }
    }

    /// The root seed.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The generator for one `(level, replica, index)` tuple.
    pub fn rng(&self, level: u32, replica: u32, index: u64) -> ChaCha8Rng {
        let mut state = mix(self.seed ^ 0x6A09_E667_F3BC_C908);
        for field in [level as u64, replica as u64, index] {
            state = mix(state ^ field.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        }
        let mut key = [0u8; 32];
        for (k, chunk) in key.chunks_exact_mut(8).enumerate() {
            let word = mix(state.wrapping_add((k as u64 + 1).wrapping_mul(0xD134_2543_DE82_EF95)));
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }

    /// Draws `n` independent values uniform on `[-sqrt(3), sqrt(3)]`
    /// (zero mean, unit variance) for one tuple.
    pub fn uniform_sym_vec(&self, level: u32, replica: u32, index: u64, n: usize) -> Vec<f64> {
        let mut rng = self.rng(level, replica, index);
        (0..n).map(|_| uniform_sym(&mut rng)).collect()
    }
}

/// One uniform draw on `[-sqrt(3), sqrt(3)]` with 53-bit resolution.
pub fn uniform_sym(rng: &mut impl RngCore) -> f64 {
    let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    SQRT3 * (2.0 * u - 1.0)
}
