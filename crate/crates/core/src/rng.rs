//! Deterministic seed-derived random streams.
//!
//! Every stochastic stage (initial phases, channel phase noise, snapshot
//! noise, Monte Carlo trials) draws from its own stream derived from the
//! master seed and a stream label. Streams are independent of execution
//! order, so trials can run in parallel and still reduce to bit-identical
//! aggregate results.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream label for the initial BS transmit phases.
pub const STREAM_INIT: u64 = 0x01;
/// Stream label for downlink channel phase noise.
pub const STREAM_CHANNEL_DL: u64 = 0x02;
/// Stream label for uplink channel phase noise.
pub const STREAM_CHANNEL_UL: u64 = 0x03;
/// Stream label for conjugation phase noise inside the loop.
pub const STREAM_LOOP: u64 = 0x04;
/// Base stream label for per-trial snapshot noise; add the trial index.
pub const STREAM_TRIAL_BASE: u64 = 0x1000;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent RNG for `(master_seed, stream)`.
pub fn derive_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut state = master_seed ^ stream.wrapping_mul(0xA076_1D64_78BD_642F);
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}
