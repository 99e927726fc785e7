//! The crate's portable random number generator.
//!
//! Every seeded operation uses SplitMix64 (Steele, Lea & Flood's 64-bit
//! mixer, as published in the reference `splitmix64.c`): the state advances
//! by the golden-ratio increment 0x9E3779B97F4A7C15 and each output is the
//! finalizing mix of the new state.  The algorithm is fixed so that a seed
//! means the same byte stream on every platform and in every
//! implementation; the frozen vectors in the tests below are the contract.
//!
//! Index selection into a list of n candidates is `next_u64() % n`.  The
//! modulo bias is irrelevant here (n is tiny against 2^64) and the simple
//! rule keeps cross-implementation behavior easy to restate.

/// SplitMix64 stream seeded with an arbitrary 64-bit value.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// Next 64-bit output.
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform-enough index into a nonempty list: `next_u64() % len`.
    pub fn pick_index(&mut self, len: usize) -> usize {
        assert!(len > 0, "cannot pick from an empty list");
        (self.next_u64() % len as u64) as usize
    }
}
