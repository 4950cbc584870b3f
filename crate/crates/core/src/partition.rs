use std::fmt;

use serde::Serialize;

use crate::error::{ensure, Result};

/// A set partition of `{1..n}`. Blocks are sorted internally and ordered by
/// their least element.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct Partition {
    blocks: Vec<Vec<u32>>,
}

impl Partition {
    pub fn new(mut blocks: Vec<Vec<u32>>) -> Result<Partition> {
        let n: usize = blocks.iter().map(Vec::len).sum();
        let mut seen = vec![false; n + 1];
        for block in &mut blocks {
            ensure!(!block.is_empty(), "empty block");
            block.sort_unstable();
            for &x in block.iter() {
                ensure!(x >= 1 && (x as usize) <= n, "element {x} outside 1..={n}");
                ensure!(!seen[x as usize], "element {x} appears twice");
                seen[x as usize] = true;
            }
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        Ok(Partition { blocks })
    }

    /// Canonicalizes blocks that are already known to partition `{1..n}`.
    pub(crate) fn from_blocks_unchecked(mut blocks: Vec<Vec<u32>>) -> Partition {
        for block in &mut blocks {
            block.sort_unstable();
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        Partition { blocks }
    }

    pub fn singletons(n: usize) -> Partition {
        Partition { blocks: (1..=n as u32).map(|i| vec![i]).collect() }
    }

    pub fn ground_size(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Vec<u32>] {
        &self.blocks
    }

    pub fn is_trivial(&self) -> bool {
        self.blocks.len() == 1
    }

    /// Merges the blocks at the given indices into one.
    pub fn merge(&self, indices: &[usize]) -> Result<Partition> {
        ensure!(indices.len() >= 2, "a merge involves at least two blocks");
        let mut take = vec![false; self.blocks.len()];
        for &i in indices {
            ensure!(i < self.blocks.len(), "block index {i} out of range");
            ensure!(!take[i], "block index {i} repeated");
            take[i] = true;
        }
        let mut merged = Vec::new();
        let mut rest = Vec::with_capacity(self.blocks.len() - indices.len() + 1);
        for (i, b) in self.blocks.iter().enumerate() {
            if take[i] {
                merged.extend_from_slice(b);
            } else {
                rest.push(b.clone());
            }
        }
        rest.push(merged);
        Ok(Partition::from_blocks_unchecked(rest))
    }

    /// `true` if every block of `self` lies inside a block of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        let n = self.ground_size();
        if coarser.ground_size() != n {
            return false;
        }
        let mut owner = vec![usize::MAX; n + 1];
        for (i, b) in coarser.blocks.iter().enumerate() {
            for &x in b {
                owner[x as usize] = i;
            }
        }
        self.blocks.iter().all(|b| b.iter().all(|&x| owner[x as usize] == owner[b[0] as usize]))
    }

    /// Applies a relabeling `x -> perm[x - 1]`.
    pub fn relabel(&self, perm: &[u32]) -> Partition {
        let blocks = self.blocks.iter().map(|b| b.iter().map(|&x| perm[x as usize - 1]).collect()).collect();
        Partition::from_blocks_unchecked(blocks)
    }
}

/// `1,2|3` style key; blocks in least-element order.
impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, b) in self.blocks.iter().enumerate() {
            if i > 0 {
                f.write_str("|")?;
            }
            for (j, x) in b.iter().enumerate() {
                if j > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{x}")?;
            }
        }
        Ok(())
    }
}
