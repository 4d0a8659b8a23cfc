//! Counter-indexed random streams.
//!
//! Every trial draws from its own stream, keyed by `(master seed, campaign
//! key, trial id)`, so trials can be evaluated in any order or partitioning
//! and still produce the same numbers.

use rand::RngCore;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and a label.
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    mix64(mix64(seed ^ 0xA076_1D64_78BD_642F).wrapping_add(label.wrapping_mul(GOLDEN)))
}

/// SplitMix64 generator started at a per-trial state.
#[derive(Debug, Clone)]
pub struct TrialStream {
    state: u64,
}

impl TrialStream {
    pub fn new(campaign_seed: u64, trial_id: u64) -> Self {
        Self {
            state: derive_seed(campaign_seed, trial_id),
        }
    }
}

impl RngCore for TrialStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}
