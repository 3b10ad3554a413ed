//! Seeded, counter-addressable random streams.
//!
//! A stream is a ChaCha8 keystream selected by `(seed, stream)`. Uniform
//! draws consume exactly one 64-bit word, so uniform draw number `n` can be
//! recomputed independently with [`Rng::u64_at`] and parallel consumers see
//! the same values as a sequential pass. Normal draws are sequential only.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

/// FNV-1a; stable across platforms and releases.
fn purpose_id(purpose: &str) -> u64 {
    purpose.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

impl Rng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, stream, inner }
    }

    /// Stream derived from a purpose label, e.g. `"slm"` or `"gaussian/x0"`.
    pub fn for_purpose(seed: u64, purpose: &str) -> Self {
        Self::new(seed, purpose_id(purpose))
    }

    /// Independent child stream; does not advance `self`.
    pub fn split(&self, purpose: &str) -> Self {
        let mixed = self.stream.rotate_left(17) ^ purpose_id(purpose);
        Self::new(self.seed, mixed)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Rewinds to the first draw of this stream.
    pub fn rewound(&self) -> Self {
        Self::new(self.seed, self.stream)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in [0, 1) with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `0..n` via a widening multiply (bias below n / 2^64).
    pub fn next_index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        widen(self.next_u64(), n)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// The `counter`-th 64-bit draw of this stream, independent of the current position.
    pub fn u64_at(&self, counter: u64) -> u64 {
        let mut probe = ChaCha8Rng::seed_from_u64(self.seed);
        probe.set_stream(self.stream);
        // One u64 spans two 32-bit keystream words.
        probe.set_word_pos(counter as u128 * 2);
        probe.next_u64()
    }

    pub fn index_at(&self, counter: u64, n: usize) -> usize {
        widen(self.u64_at(counter), n)
    }

    pub fn f64_at(&self, counter: u64) -> f64 {
        (self.u64_at(counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

fn widen(x: u64, n: usize) -> usize {
    ((x as u128 * n as u128) >> 64) as usize
}
