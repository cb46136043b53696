//! Counter-addressed random streams.
//!
//! Every block (and every chunk inside a block) owns its own ChaCha stream,
//! selected from `(seed, block_index, chunk)` alone, so results do not depend
//! on how rayon schedules the work.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Samples per independently seeded chunk.
pub const CHUNK_SIZE: usize = 1 << 18;

#[derive(Debug, Clone)]
pub struct SimRng {
    inner: ChaCha8Rng,
    seed: u64,
    block_index: u64,
}

impl SimRng {
    pub fn new(seed: u64, block_index: u64) -> Self {
        Self::for_chunk(seed, block_index, 0)
    }

    pub fn for_chunk(seed: u64, block_index: u64, chunk: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&block_index.to_le_bytes());
        let mut inner = ChaCha8Rng::from_seed(key);
        inner.set_stream(chunk);
        Self {
            inner,
            seed,
            block_index,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn block_index(&self) -> u64 {
        self.block_index
    }

    /// Standard normal draw.
    #[inline]
    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Draw from `N(0, variance)`; zero variance returns 0 without consuming.
    #[inline]
    pub fn gaussian(&mut self, variance: f64) -> f64 {
        if variance > 0.0 {
            variance.sqrt() * self.normal()
        } else {
            0.0
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.random()
    }
}
