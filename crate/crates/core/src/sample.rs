//! Versioned deterministic sampling.
//!
//! Every random choice in the toolkit is drawn from [`SplitMix64`] so that a
//! `(pool, k, seed)` triple selects the same elements on every platform and
//! in every release that reports the same [`SAMPLER_VERSION`]:
//!
//! * the generator is SplitMix64 (Steele, Lea and Flood), state advanced by
//!   `0x9E3779B97F4A7C15` and output mixed with the standard finalizer;
//! * bounded draws use rejection sampling: for a bound `n`, outputs below
//!   `2^64 mod n` are discarded and the rest reduced with `% n`;
//! * `seeded_sample` is a partial Fisher-Yates shuffle over indices: for
//!   `i in 0..k`, swap position `i` with `i + below(len - i)` and emit the
//!   element now at `i`;
//! * `shuffle` is a full Fisher-Yates from the back: for `i` from `len-1`
//!   down to 1, swap `i` with `below(i + 1)`.

use alloc::vec::Vec;

use crate::error::{Error, Result};

pub const SAMPLER_VERSION: &str = "splitmix64-fisher-yates-v1";

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform integer in `0..n`. Panics if `n == 0`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "empty range");
        let threshold = n.wrapping_neg() % n;
        loop {
            let r = self.next_u64();
            if r >= threshold {
                return r % n;
            }
        }
    }

    pub fn index(&mut self, len: usize) -> usize {
        self.below(len as u64) as usize
    }

    pub fn choose<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        &items[self.index(items.len())]
    }

    /// Uniform float in `[0, 1)` from the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent stream seed from a base seed and a stream label.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    mix64(seed ^ mix64(stream.wrapping_add(GOLDEN_GAMMA)))
}

/// Indices of `k` distinct positions in `0..len`, in selection order.
pub fn sample_indices(len: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k > len {
        return Err(Error::SampleTooLarge { k, len });
    }
    let mut rng = SplitMix64::new(seed);
    let mut idx: Vec<usize> = (0..len).collect();
    for i in 0..k {
        let j = i + rng.index(len - i);
        idx.swap(i, j);
    }
    idx.truncate(k);
    Ok(idx)
}

/// `k` distinct elements of `pool`, identical for identical `(pool, k, seed)`.
pub fn seeded_sample<T: Clone>(pool: &[T], k: usize, seed: u64) -> Result<Vec<T>> {
    Ok(sample_indices(pool.len(), k, seed)?.into_iter().map(|i| pool[i].clone()).collect())
}

pub fn shuffle<T>(items: &mut [T], rng: &mut SplitMix64) {
    for i in (1..items.len()).rev() {
        let j = rng.index(i + 1);
        items.swap(i, j);
    }
}
