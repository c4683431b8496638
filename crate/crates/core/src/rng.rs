//! SplitMix64 pseudo-random number generation.
//!
//! Every stochastic step in the crate (train/test shuffling, fold dealing,
//! bootstrap draws, feature subsampling, randomized search) consumes one of
//! these generators, so the output sequence is a pure function of the seed
//! and identical on every platform.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 generator state.
///
/// Not meant to be shared between threads; parallel consumers derive child
/// seeds up front with [`SplitMix64::next_u64`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn state(&self) -> u64 {
        self.state
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Unbiased draw from `[0, n)`.
    ///
    /// Draws at or above `floor(2^64 / n) * n` are rejected so every residue
    /// is equally likely.
    pub fn gen_below(&mut self, n: u64) -> Result<u64> {
        if n == 0 {
            return Err(Error::invalid("gen_below requires n >= 1"));
        }
        let limit = ((1u128 << 64) / n as u128) * n as u128;
        loop {
            let draw = self.next_u64();
            if (draw as u128) < limit {
                return Ok(draw % n);
            }
        }
    }

    /// Index draw for slice positions; `n` must be non-zero.
    fn index_below(&mut self, n: usize) -> usize {
        self.gen_below(n as u64).expect("non-empty range") as usize
    }

    /// In-place Fisher–Yates shuffle, walking from the last slot down.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index_below(i + 1);
            items.swap(i, j);
        }
    }

    /// `k` distinct indices from `0..n` via a partial forward Fisher–Yates.
    ///
    /// Slot `i` (for `i < k`) is swapped with `i + gen_below(n - i)`; the
    /// first `k` slots, in order, are the sample.
    pub fn sample_without_replacement(&mut self, k: usize, n: usize) -> Result<Vec<usize>> {
        if k > n {
            return Err(Error::invalid(format!(
                "cannot sample {k} distinct indices from {n}"
            )));
        }
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.index_below(n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        Ok(pool)
    }
}
