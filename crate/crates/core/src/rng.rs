//! SplitMix64 stream used for the built-in extractor weights and for seed
//! derivation.
//!
//! The generator is the reference SplitMix64: the state advances by
//! `0x9E3779B97F4A7C15`, and each output is the state passed through the
//! mixing function below. Uniform doubles take the top 53 bits. Any other
//! implementation that follows these three lines reproduces the built-in
//! weights bit for bit.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Seed for sub-task `(a, b)` of a run with base seed `base`.
pub fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    mix64(mix64(base ^ mix64(a.wrapping_add(GOLDEN_GAMMA))).wrapping_add(mix64(b ^ 0x5851_F42D_4C95_7F2D)))
}
