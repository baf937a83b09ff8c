//! Seeded pseudo-random number generation.
//!
//! Every randomized step in this crate (centroid sampling, synthetic clouds,
//! weight materialization) draws from the generator below so results are
//! reproducible bit-for-bit across platforms and across reimplementations in
//! other languages. The exact algorithm is therefore part of the artifact's
//! contract and is spelled out here.
//!
//! # Algorithm: xorshift64*
//!
//! State is a single nonzero 64-bit word. One step:
//!
//! ```text
//! x ^= x >> 12
//! x ^= x << 25
//! x ^= x >> 27
//! output = x * 0x2545F4914F6CDD1D   (wrapping 64-bit multiply)
//! ```
//!
//! Seeding: the state is the seed itself, except seed 0 (which would lock the
//! generator at zero) is replaced by the multiplier constant
//! `0x2545F4914F6CDD1D`.
//!
//! Derived values:
//! - `next_index(n)` is `next_u64() % n` (the modulo bias is irrelevant at
//!   the point counts this crate handles, and the simple rule keeps
//!   cross-language ports trivial);
//! - `next_f32()` takes the top 24 bits of `next_u64()` and scales by 2^-24,
//!   yielding a uniform value in [0, 1);
//! - `next_gaussian()` is one Box-Muller transform: with u1 in (0, 1] and
//!   u2 in [0, 1) from two `next_f32()` draws (u1 = 1 - draw),
//!   `sqrt(-2 ln u1) * cos(2 pi u2)` evaluated in f64 and rounded to f32.

const MULT: u64 = 0x2545F4914F6CDD1D;

/// xorshift64* generator. See the module docs for the exact algorithm.
#[derive(Debug, Clone)]
pub struct Xorshift64Star {
    state: u64,
}

impl Xorshift64Star {
    pub fn new(seed: u64) -> Self {
        Self {
            state: if seed == 0 { MULT } else { seed },
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(MULT)
    }

    /// Uniform index in `0..n`. `n` must be nonzero.
    pub fn next_index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_u64() % n as u64) as usize
    }

    /// Uniform f32 in [0, 1).
    pub fn next_f32(&mut self) -> f32 {
        (self.next_u64() >> 40) as f32 / (1u32 << 24) as f32
    }

    /// Standard normal deviate via Box-Muller.
    pub fn next_gaussian(&mut self) -> f32 {
        let u1 = 1.0 - f64::from(self.next_f32()); // (0, 1]
        let u2 = f64::from(self.next_f32()); // [0, 1)
        ((-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()) as f32
    }
}

/// Mixes a salt into a base seed so independent streams (per module, per
/// layer) can be derived from one run seed. One xorshift64* step of the
/// combined word.
pub fn derive_seed(base: u64, salt: u64) -> u64 {
    let mut rng = Xorshift64Star::new(base ^ salt.wrapping_mul(MULT).rotate_left(17));
    rng.next_u64()
}
