//! Seeded randomness.
//!
//! Every random decision in a run flows through [`SimRng`], which is ChaCha8
//! (`rand_chacha::ChaCha8Rng`) seeded from a 64-bit value with
//! `SeedableRng::seed_from_u64`. ChaCha8 output is specified independently of
//! platform and word size, so a seed reproduces a run anywhere.
//!
//! Uniform draws in `[0, 1)` take the top 53 bits of one `next_u64` call.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub type SimRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One uniform draw in `[0, 1)`, consuming exactly one `u64`.
pub fn unit_draw<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    (rng.next_u64() >> 11) as f64 * SCALE
}

/// `floor(u * n)` clamped to `n - 1`. `n` must be non-zero.
pub fn index_for(u: f64, n: usize) -> usize {
    debug_assert!(n > 0);
    ((u * n as f64) as usize).min(n - 1)
}

/// Seed for stream `index` under `master`: the first word of ChaCha8 seeded
/// with `master` on stream `index`.
///
/// Stream 0 feeds the target server; agent `i` uses stream `i + 1`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.next_u64()
}

pub fn server_seed(master: u64) -> u64 {
    derive_seed(master, 0)
}

pub fn agent_seed(master: u64, agent: usize) -> u64 {
    derive_seed(master, agent as u64 + 1)
}
