//! Seeded randomness and the block / sample selection primitives.
//!
//! Every run is driven by one 64-bit seed. Independent consumers (the
//! synchronous selector, each asynchronous processor, the delay clock, the
//! conflict arbiter, data generators) get their own ChaCha8 stream of that
//! seed, so draws never interleave across consumers and runs are replayable
//! regardless of thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type RunRng = ChaCha8Rng;

/// Stream ids. Asynchronous processor `i` draws from stream `i`; the
/// synchronous selector shares stream 0 with processor 0 so a one-processor
/// asynchronous run sees the same block and batch sequence as the
/// synchronous one. Everything else lives far above any processor id.
pub mod streams {
    pub const SYNC_SELECTION: u64 = 0;
    const RESERVED: u64 = 1 << 40;
    pub const DELAYS: u64 = RESERVED;
    pub const ARBITER: u64 = RESERVED + 1;
    pub const DATA: u64 = RESERVED + 2;
    pub const NOISE: u64 = RESERVED + 3;
    pub const SPLIT: u64 = RESERVED + 4;
    pub const CONSTANTS: u64 = RESERVED + 5;

    pub const fn processor(i: usize) -> u64 {
        i as u64
    }
}

/// ChaCha8 generator on stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> RunRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Per-processor random state: which blocks to touch and which samples to
/// average over.
#[derive(Debug, Clone)]
pub struct SelectionState {
    rng: RunRng,
    processors: usize,
    batch: usize,
    scratch: Vec<usize>,
}

impl SelectionState {
    pub fn new(rng: RunRng, processors: usize, batch: usize) -> Result<Self> {
        if processors == 0 {
            return Err(Error::InvalidConfig("processor count must be >= 1".into()));
        }
        if batch == 0 {
            return Err(Error::InvalidConfig("mini-batch size must be >= 1".into()));
        }
        Ok(Self {
            rng,
            processors,
            batch,
            scratch: Vec::new(),
        })
    }

    pub fn from_seed(seed: u64, stream: u64, processors: usize, batch: usize) -> Result<Self> {
        Self::new(stream_rng(seed, stream), processors, batch)
    }

    pub fn processors(&self) -> usize {
        self.processors
    }

    pub fn batch_size(&self) -> usize {
        self.batch
    }

    pub fn rng_mut(&mut self) -> &mut RunRng {
        &mut self.rng
    }

    /// `I` distinct block indices, uniform over all size-`I` subsets of
    /// `0..num_blocks`, via a partial Fisher–Yates shuffle.
    pub fn select_blocks(&mut self, num_blocks: usize) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(self.processors);
        self.select_blocks_into(num_blocks, &mut out)?;
        Ok(out)
    }

    pub fn select_blocks_into(&mut self, num_blocks: usize, out: &mut Vec<usize>) -> Result<()> {
        if self.processors > num_blocks {
            return Err(Error::InvalidConfig(format!(
                "processors ({}) exceed blocks ({num_blocks})",
                self.processors
            )));
        }
        self.scratch.clear();
        self.scratch.extend(0..num_blocks);
        out.clear();
        for i in 0..self.processors {
            let j = self.rng.random_range(i..num_blocks);
            self.scratch.swap(i, j);
            out.push(self.scratch[i]);
        }
        Ok(())
    }

    /// `L` sample indices drawn uniformly with replacement from `0..n`.
    pub fn sample_minibatch(&mut self, n: usize) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(self.batch);
        self.sample_minibatch_into(n, &mut out)?;
        Ok(out)
    }

    pub fn sample_minibatch_into(&mut self, n: usize, out: &mut Vec<usize>) -> Result<()> {
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        out.clear();
        for _ in 0..self.batch {
            out.push(self.rng.random_range(0..n));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn all_blocks_when_processors_equal_blocks() {
        let mut s = SelectionState::from_seed(3, 0, 16, 1).unwrap();
        for _ in 0..50 {
            let mut b = s.select_blocks(16).unwrap();
            b.sort_unstable();
            assert_eq!(b, (0..16).collect::<Vec<_>>());
        }
        let mut one = SelectionState::from_seed(3, 0, 1, 1).unwrap();
        assert_eq!(one.select_blocks(1).unwrap(), vec![0]);
    }

    #[test]
    fn too_many_processors() {
        let mut s = SelectionState::from_seed(1, 0, 5, 1).unwrap();
        assert!(s.select_blocks(4).is_err());
    }

    #[test]
    fn inclusion_frequency() {
        let draws = 100_000;
        let mut s = SelectionState::from_seed(11, 0, 4, 1).unwrap();
        let mut counts = [0u32; 16];
        for _ in 0..draws {
            for b in s.select_blocks(16).unwrap() {
                counts[b] += 1;
            }
        }
        let se = (0.25f64 * 0.75 / draws as f64).sqrt();
        for c in counts {
            let freq = c as f64 / draws as f64;
            assert!((freq - 0.25).abs() < 4.0 * se, "freq {freq}");
        }
    }

    #[test]
    fn subset_uniformity_chi_square() {
        // B=5, I=2: 10 subsets, df = 9, critical value at alpha=0.001.
        const CRIT: f64 = 27.877;
        let draws = 100_000;
        let mut s = SelectionState::from_seed(5, 0, 2, 1).unwrap();
        let mut counts: HashMap<(usize, usize), u32> = HashMap::new();
        for _ in 0..draws {
            let b = s.select_blocks(5).unwrap();
            assert_ne!(b[0], b[1]);
            *counts.entry((b[0].min(b[1]), b[0].max(b[1]))).or_default() += 1;
        }
        assert_eq!(counts.len(), 10);
        let expected = draws as f64 / 10.0;
        let chi2: f64 = counts
            .values()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < CRIT, "chi2 = {chi2}");
    }

    #[test]
    fn minibatch_basics() {
        let mut s = SelectionState::from_seed(2, 0, 1, 1).unwrap();
        assert_eq!(s.sample_minibatch(1).unwrap(), vec![0]);
        assert!(matches!(s.sample_minibatch(0), Err(Error::EmptyDataset)));
        let mut s = SelectionState::from_seed(2, 0, 1, 10).unwrap();
        let b = s.sample_minibatch(10_000).unwrap();
        assert_eq!(b.len(), 10);
        assert!(b.iter().all(|&i| i < 10_000));
    }

    #[test]
    fn minibatch_frequency() {
        let draws = 100_000;
        let mut s = SelectionState::from_seed(9, 0, 1, 1).unwrap();
        let mut counts = [0u32; 4];
        for _ in 0..draws {
            counts[s.sample_minibatch(4).unwrap()[0]] += 1;
        }
        let se = (0.25f64 * 0.75 / draws as f64).sqrt();
        for c in counts {
            assert!((c as f64 / draws as f64 - 0.25).abs() < 4.0 * se);
        }
    }

    #[test]
    fn equal_seeds_equal_draws() {
        let mut a = SelectionState::from_seed(42, 7, 3, 5).unwrap();
        let mut b = SelectionState::from_seed(42, 7, 3, 5).unwrap();
        for _ in 0..100 {
            assert_eq!(a.select_blocks(9).unwrap(), b.select_blocks(9).unwrap());
            assert_eq!(
                a.sample_minibatch(77).unwrap(),
                b.sample_minibatch(77).unwrap()
            );
        }
        let mut c = SelectionState::from_seed(42, 8, 3, 5).unwrap();
        let da: Vec<_> = (0..10).map(|_| a.sample_minibatch(1000).unwrap()).collect();
        let dc: Vec<_> = (0..10).map(|_| c.sample_minibatch(1000).unwrap()).collect();
        assert_ne!(da, dc);
    }
}
