//! Counter-keyed random streams.
//!
//! Every draw in a Monte Carlo run comes from a stream addressed by
//! `(seed, trial, block, role)`. The key is hashed with SplitMix64 into a
//! Xoshiro256++ seed, so any trial can be replayed on its own and the order in
//! which workers visit trials never changes a result.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

/// What a stream is used for inside one block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamRole {
    JammerCoefficients = 1,
    /// Channels and noise of one block.
    BlockDraw = 2,
    PilotAssignment = 3,
}

/// Trial-level streams use this block index.
pub const TRIAL_LEVEL: u64 = u64::MAX;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Address of one independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey {
    pub seed: u64,
    pub trial: u64,
    pub block: u64,
    pub role: StreamRole,
}

impl StreamKey {
    pub fn new(seed: u64, trial: u64, block: u64, role: StreamRole) -> Self {
        Self { seed, trial, block, role }
    }

    pub fn rng(&self) -> Xoshiro256PlusPlus {
        let mut state = splitmix64(self.seed);
        let mut bytes = [0u8; 32];
        for (chunk, word) in bytes
            .chunks_exact_mut(8)
            .zip([self.trial, self.block, self.role as u64, 0x6a61_6d64_6574])
        {
            state = splitmix64(state ^ word);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        Xoshiro256PlusPlus::from_seed(bytes)
    }
}
