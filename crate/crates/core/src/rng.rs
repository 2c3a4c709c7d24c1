//! Counter-based random streams.
//!
//! Every stream is a pure function of a 64-bit key. Keys are derived by
//! hashing a seed together with structural indices (run number, particle
//! label, splitting level, ...), so the random numbers consumed by one
//! particle never depend on how many numbers other particles consumed or on
//! which worker thread ran them.

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Key of a counter-based stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey(pub u64);

impl StreamKey {
    pub fn from_seed(seed: u64) -> Self {
        StreamKey(mix64(seed ^ 0x005E_ED0F_B4A1_1E75))
    }

    /// Derives an independent sub-key.
    #[inline]
    pub fn child(self, index: u64) -> Self {
        StreamKey(mix64(self.0 ^ mix64(index.wrapping_add(0x632B_E59B_D9B4_E019)).rotate_left(23)))
    }

    /// Sub-key for a named purpose, so that unrelated uses of one seed never collide.
    pub fn domain(self, tag: &str) -> Self {
        let h = tag.bytes().fold(0xCBF2_9CE4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01B3));
        self.child(h)
    }

    pub fn stream(self) -> RandomStream {
        RandomStream(Xoshiro256PlusPlus::seed_from_u64(self.0))
    }
}

/// A deterministic random stream owned by a single worker.
#[derive(Clone, Debug)]
pub struct RandomStream(Xoshiro256PlusPlus);

impl RandomStream {
    pub fn from_seed(seed: u64) -> Self {
        StreamKey::from_seed(seed).stream()
    }

    /// Uniform draw in [0, 1) with 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for RandomStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }
    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}
