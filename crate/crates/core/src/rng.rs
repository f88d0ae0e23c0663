//! Counter-based random streams.
//!
//! A stream is keyed by `(seed, stream_id)` and backed by ChaCha8, whose
//! output depends only on the key, stream and block counter. Two streams with
//! the same key produce the same draws on every platform, and episode `e` of
//! an evaluation always reads stream `e` no matter which worker runs it.

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// High bits reserved for namespacing stream ids by purpose, so that e.g.
/// episode 3 and synthetic class 3 never share a stream.
pub mod domain {
    pub const EPISODE: u64 = 0;
    pub const PROTOTYPE: u64 = 1 << 56;
    pub const VIDEO: u64 = 2 << 56;
    pub const INIT: u64 = 3 << 56;
    pub const TRAIN: u64 = 4 << 56;
    pub const VALIDATION: u64 = 5 << 56;
    pub const SPLITS: u64 = 6 << 56;
    pub const PRETRAIN: u64 = 7 << 56;
    pub const MIXING: u64 = 8 << 56;
}

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self { seed, stream_id, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }

    /// `amount` distinct indices from `0..n`, in draw order.
    pub fn sample_indices(&mut self, n: usize, amount: usize) -> Vec<usize> {
        rand::seq::index::sample(&mut self.inner, n, amount).into_vec()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
