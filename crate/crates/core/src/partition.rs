//! Block partitions of the decision variable and the parameter vector that
//! lives on top of one.

use std::ops::Range;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Contiguous split of `p` coordinates into `B` near-equal blocks.
///
/// When `B` does not divide `p`, the first `p mod B` blocks carry one extra
/// coordinate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    dim: usize,
    offsets: Vec<(usize, usize)>,
}

impl BlockPartition {
    pub fn new(dim: usize, blocks: usize) -> Result<Self> {
        if blocks == 0 {
            return Err(Error::InvalidConfig("number of blocks must be >= 1".into()));
        }
        if blocks > dim {
            return Err(Error::InvalidConfig(format!(
                "number of blocks ({blocks}) exceeds dimension ({dim})"
            )));
        }
        let base = dim / blocks;
        let extra = dim % blocks;
        let mut offsets = Vec::with_capacity(blocks);
        let mut start = 0;
        for b in 0..blocks {
            let len = base + usize::from(b < extra);
            offsets.push((start, len));
            start += len;
        }
        debug_assert_eq!(start, dim);
        Ok(Self { dim, offsets })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_blocks(&self) -> usize {
        self.offsets.len()
    }

    /// `(start, length)` of every block, in order.
    pub fn offsets(&self) -> &[(usize, usize)] {
        &self.offsets
    }

    pub fn range(&self, block: usize) -> Range<usize> {
        let (s, l) = self.offsets[block];
        s..s + l
    }

    pub fn block_len(&self, block: usize) -> usize {
        self.offsets[block].1
    }

    pub fn ranges(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        self.offsets.iter().map(|&(s, l)| s..s + l)
    }

    pub fn check_block(&self, block: usize) -> Result<()> {
        if block < self.offsets.len() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index: block,
                len: self.offsets.len(),
            })
        }
    }
}

/// Shorthand for [`BlockPartition::new`].
pub fn make_partition(dim: usize, blocks: usize) -> Result<BlockPartition> {
    BlockPartition::new(dim, blocks)
}

/// Dense decision vector carrying its block partition.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    data: Vec<f64>,
    partition: Arc<BlockPartition>,
}

impl ParamVector {
    pub fn new(data: Vec<f64>, partition: Arc<BlockPartition>) -> Result<Self> {
        if data.len() != partition.dim() {
            return Err(Error::DimensionMismatch {
                expected: partition.dim(),
                actual: data.len(),
            });
        }
        Ok(Self { data, partition })
    }

    pub fn filled(value: f64, partition: Arc<BlockPartition>) -> Self {
        Self {
            data: vec![value; partition.dim()],
            partition,
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.data
    }

    pub fn partition(&self) -> &Arc<BlockPartition> {
        &self.partition
    }

    pub fn block(&self, block: usize) -> &[f64] {
        &self.data[self.partition.range(block)]
    }

    pub fn block_mut(&mut self, block: usize) -> &mut [f64] {
        let r = self.partition.range(block);
        &mut self.data[r]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn even_split() {
        let p = make_partition(1024, 16).unwrap();
        assert_eq!(p.num_blocks(), 16);
        assert!(p.offsets().iter().all(|&(_, l)| l == 64));
    }

    #[test]
    fn single_block() {
        let p = make_partition(5, 1).unwrap();
        assert_eq!(p.offsets(), &[(0, 5)]);
    }

    #[test]
    fn remainder_goes_first() {
        let p = make_partition(10, 3).unwrap();
        let lens: Vec<_> = p.offsets().iter().map(|o| o.1).collect();
        assert_eq!(lens, vec![4, 3, 3]);
    }

    #[test]
    fn rejects_bad_block_counts() {
        assert!(matches!(make_partition(3, 4), Err(Error::InvalidConfig(_))));
        assert!(matches!(make_partition(3, 0), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn param_vector_length_checked() {
        let part = Arc::new(make_partition(4, 2).unwrap());
        assert!(ParamVector::new(vec![0.0; 3], part.clone()).is_err());
        let x = ParamVector::new(vec![1.0, 2.0, 3.0, 4.0], part).unwrap();
        assert_eq!(x.block(1), &[3.0, 4.0]);
    }

    proptest! {
        #[test]
        fn ranges_cover_exactly(dim in 1usize..500, frac in 0.0f64..1.0) {
            let blocks = 1 + ((dim - 1) as f64 * frac) as usize;
            let p = make_partition(dim, blocks).unwrap();
            let covered: Vec<usize> = p.ranges().flatten().collect();
            prop_assert_eq!(covered, (0..dim).collect::<Vec<_>>());
            let lo = dim / blocks;
            let hi = dim.div_ceil(blocks);
            prop_assert!(p.offsets().iter().all(|&(_, l)| l == lo || l == hi));
        }
    }
}
