//! Per-path random substreams.
//!
//! Generator version 1: path `i` reads the ChaCha8 keystream selected by
//! `seed_from_u64(master_seed)` with stream id `i` (or `i / 2` under
//! antithetic pairing), starting at word position 0. Normal variates come
//! from the ziggurat sampler in `rand_distr::StandardNormal`, one variate per
//! simulated year, in year order. Changing any of this changes every pinned
//! seed in the test suite, so bump [`GENERATOR_VERSION`] if you do.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const GENERATOR_VERSION: u32 = 1;

/// A source of independent standard normal draws.
pub trait NormalSource {
    fn next_normal(&mut self) -> f64;
}

#[derive(Debug, Clone)]
pub struct PathStream {
    rng: ChaCha8Rng,
    negate: bool,
}

impl PathStream {
    pub fn new(master_seed: u64, substream: u64, negate: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(substream);
        PathStream { rng, negate }
    }

    /// Stream for `path_index`. Antithetic pairs `(2k, 2k + 1)` share
    /// substream `k`, the odd member negating every draw.
    pub fn for_path(master_seed: u64, path_index: usize, antithetic: bool) -> Self {
        if antithetic {
            PathStream::new(master_seed, (path_index / 2) as u64, path_index % 2 == 1)
        } else {
            PathStream::new(master_seed, path_index as u64, false)
        }
    }
}

impl NormalSource for PathStream {
    fn next_normal(&mut self) -> f64 {
        let z: f64 = self.rng.sample(StandardNormal);
        if self.negate {
            -z
        } else {
            z
        }
    }
}

/// Replays a fixed list of draws, then zeros.
#[derive(Debug, Clone)]
pub struct FixedDraws<'a> {
    draws: &'a [f64],
    pos: usize,
}

impl<'a> FixedDraws<'a> {
    pub fn new(draws: &'a [f64]) -> Self {
        FixedDraws { draws, pos: 0 }
    }
}

impl NormalSource for FixedDraws<'_> {
    fn next_normal(&mut self) -> f64 {
        let z = self.draws.get(self.pos).copied().unwrap_or(0.0);
        self.pos += 1;
        z
    }
}
