//! Seeded, counter-addressable random streams.
//!
//! Every lattice site `(i, j)` owns a fixed slice of a ChaCha8 key stream:
//! row `i` selects the stream id and column `j` the word position. A site's
//! draws therefore depend only on `(seed, i, j)`, never on generation order.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 32-bit words reserved per site (two `u64` draws).
const WORDS_PER_SITE: u128 = 4;
const COLUMN_OFFSET: i64 = 1 << 40;

/// Scale from 52 random bits to the unit interval.
const UNIT: f64 = 1.0 / (1u64 << 52) as f64;

pub struct SiteRng {
    rng: ChaCha8Rng,
}

impl SiteRng {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Position the stream at site `(i, j)`. Consecutive [`SiteRng::next_pair`]
    /// calls then walk along row `i`.
    pub fn seek(&mut self, i: i64, j: i64) {
        self.rng.set_stream(i as u64);
        self.rng
            .set_word_pos(((j + COLUMN_OFFSET) as u128) * WORDS_PER_SITE);
    }

    #[inline]
    pub fn next_pair(&mut self) -> (u64, u64) {
        (self.rng.next_u64(), self.rng.next_u64())
    }
}

/// Uniform on the open interval `(0, 1)`.
#[inline]
pub fn open_unit(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * UNIT
}

/// Standard normal from two uniform words (Box-Muller, cosine branch).
#[inline]
pub fn box_muller(a: u64, b: u64) -> f64 {
    let r = (-2.0 * open_unit(a).ln()).sqrt();
    r * (std::f64::consts::TAU * open_unit(b)).cos()
}

/// Seed of replication `index` derived from a base seed.
pub fn replication_seed(base: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(index);
    rng.next_u64()
}

/// General purpose seeded generator for sequential sampling.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform draw in `[lo, hi)`.
pub fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}
