//! Counter-based random substreams, one per trial.
//!
//! The stream for a trial depends only on the master seed and the trial id,
//! so trials can be evaluated in any order on any number of workers.

use rand::RngCore;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of an independent run labelled `label` under `master_seed`, e.g.
/// one analyzer setting of a scan. Runs sharing a seed replay the same
/// pair realizations and their statistics are correlated.
pub fn derive_seed(master_seed: u64, label: u64) -> u64 {
    mix64(master_seed ^ mix64(label.wrapping_add(GOLDEN)))
}

/// Identifies the substream of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStreamSpec {
    pub master_seed: u64,
}

impl RngStreamSpec {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    pub fn stream(&self, trial_id: u64) -> Substream {
        Substream::new(self.master_seed, trial_id)
    }
}

/// SplitMix64 sequence keyed by (seed, trial id).
#[derive(Debug, Clone)]
pub struct Substream {
    key: u64,
    counter: u64,
}

impl Substream {
    pub fn new(master_seed: u64, trial_id: u64) -> Self {
        let key = mix64(mix64(master_seed ^ 0x5EED_0F_A11_D1C2) ^ trial_id.wrapping_mul(GOLDEN));
        Self { key, counter: 0 }
    }

    /// Uniform in [0, 1) with 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn uniform_in(&mut self, a: f64, b: f64) -> f64 {
        a + (b - a) * self.uniform()
    }
}

impl RngCore for Substream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(8) {
            let v = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&v[..chunk.len()]);
        }
    }
}
