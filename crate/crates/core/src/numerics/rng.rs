//! Counter-addressed random streams.
//!
//! A stream is a ChaCha8 keystream keyed by the global seed and selected by a
//! 64-bit stream id. Every draw consumes a fixed number of keystream words, so
//! the `n`-th draw of a stream sits at a known position and a stream can be
//! resumed at any counter with [`RngStream::seek`].

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Keystream words (32-bit) consumed per `u64` draw.
const WORDS_PER_DRAW: u128 = 2;

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    counter: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, counter: 0, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream
    }

    /// Number of `u64` draws consumed so far.
    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// Repositions the stream so the next draw is draw number `counter`.
    pub fn seek(&mut self, counter: u64) {
        if counter != self.counter {
            self.rng.set_word_pos(u128::from(counter) * WORDS_PER_DRAW);
            self.counter = counter;
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter += 1;
        self.rng.next_u64()
    }

    /// Uniform on the open interval `(0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Two independent standard normals (Box–Muller); always two draws.
    #[inline]
    pub fn normal_pair(&mut self) -> (f64, f64) {
        let u1 = self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        (radius * c, radius * s)
    }

    /// Fills `out` with standard normals, consuming `2⌈len/2⌉` draws.
    #[inline]
    pub fn fill_normals(&mut self, out: &mut [f64]) {
        let mut chunks = out.chunks_exact_mut(2);
        for pair in &mut chunks {
            let (a, b) = self.normal_pair();
            pair[0] = a;
            pair[1] = b;
        }
        if let [last] = chunks.into_remainder() {
            *last = self.normal_pair().0;
        }
    }
}

/// Draws consumed by [`RngStream::fill_normals`] for `n` normals.
pub const fn normal_draws(n: usize) -> u64 {
    (2 * n.div_ceil(2)) as u64
}

/// SplitMix64 finalizer, used to derive purpose-specific seeds.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for a sub-purpose (`tag`) of a run seeded with `seed`.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    mix64(mix64(seed) ^ mix64(tag.wrapping_mul(0xd6e8_feb8_6659_fd93)))
}
