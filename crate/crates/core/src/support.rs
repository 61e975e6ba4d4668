//! Per-block sparsity patterns and supports.

use serde::{Deserialize, Serialize};

use crate::dictionary::{validate_indices, BlockPartition};
use crate::error::{Error, Result};

/// Per-block sparsities `(s_1, ..., s_N)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SparsityPattern {
    s: Vec<usize>,
}

impl SparsityPattern {
    pub fn new(s: Vec<usize>) -> Self {
        SparsityPattern { s }
    }

    /// Parses `2,3`.
    pub fn parse(text: &str) -> Result<Self> {
        let s = text
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::Parse(format!("bad sparsity {t:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SparsityPattern { s })
    }

    pub fn per_block(&self) -> &[usize] {
        &self.s
    }

    pub fn n_blocks(&self) -> usize {
        self.s.len()
    }

    pub fn total(&self) -> usize {
        self.s.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.s.iter().all(|&v| v == 0)
    }

    /// Checks `s_i ≤ n_i` against a partition.
    pub fn check_against(&self, partition: &BlockPartition) -> Result<()> {
        if self.s.len() != partition.n_blocks() {
            return Err(Error::Dimension(format!(
                "pattern has {} entries, partition has {} blocks",
                self.s.len(),
                partition.n_blocks()
            )));
        }
        for (i, (&s, &w)) in self.s.iter().zip(partition.widths()).enumerate() {
            if s > w {
                return Err(Error::OutOfRange(format!(
                    "s_{i} = {s} exceeds block width {w}"
                )));
            }
        }
        Ok(())
    }
}

/// Support `S` split by block, with its complement `T`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportPartition {
    /// Local indices per block, ascending.
    pub supports: Vec<Vec<usize>>,
    /// Global support, ascending.
    pub global: Vec<usize>,
    /// Global complement, ascending.
    pub complement: Vec<usize>,
}

impl SupportPartition {
    pub fn from_global(partition: &BlockPartition, indices: &[usize]) -> Result<Self> {
        let global = validate_indices(indices, partition.n())?;
        let mut supports = vec![Vec::new(); partition.n_blocks()];
        for &j in &global {
            let (b, local) = partition.locate(j).expect("validated index");
            supports[b].push(local);
        }
        let mut in_support = vec![false; partition.n()];
        for &j in &global {
            in_support[j] = true;
        }
        let complement = (0..partition.n()).filter(|&j| !in_support[j]).collect();
        Ok(SupportPartition {
            supports,
            global,
            complement,
        })
    }

    pub fn from_local(partition: &BlockPartition, supports: &[Vec<usize>]) -> Result<Self> {
        if supports.len() != partition.n_blocks() {
            return Err(Error::Dimension(format!(
                "{} local supports for {} blocks",
                supports.len(),
                partition.n_blocks()
            )));
        }
        let mut global = Vec::new();
        for (b, local) in supports.iter().enumerate() {
            for &k in local {
                if k >= partition.width(b) {
                    return Err(Error::IndexOutOfRange {
                        index: k,
                        n: partition.width(b),
                    });
                }
                global.push(partition.offset(b) + k);
            }
        }
        Self::from_global(partition, &global)
    }

    pub fn pattern(&self) -> SparsityPattern {
        SparsityPattern::new(self.supports.iter().map(Vec::len).collect())
    }

    pub fn len(&self) -> usize {
        self.global.len()
    }

    pub fn is_empty(&self) -> bool {
        self.global.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn global_and_local_agree() {
        let p = BlockPartition::new(vec![3, 4]).unwrap();
        let s = SupportPartition::from_global(&p, &[5, 1, 3]).unwrap();
        assert_eq!(s.global, vec![1, 3, 5]);
        assert_eq!(s.supports, vec![vec![1], vec![0, 2]]);
        assert_eq!(s.complement, vec![0, 2, 4, 6]);
        assert_eq!(s.pattern().per_block(), &[1, 2]);
        assert_eq!(s.pattern().total(), 3);
        let t = SupportPartition::from_local(&p, &[vec![1], vec![2, 0]]).unwrap();
        assert_eq!(s, t);
        assert!(SupportPartition::from_local(&p, &[vec![3], vec![]]).is_err());
        assert!(SupportPartition::from_global(&p, &[7]).is_err());
    }

    #[test]
    fn pattern_validation() {
        let p = BlockPartition::new(vec![2, 2]).unwrap();
        assert!(SparsityPattern::new(vec![2, 2]).check_against(&p).is_ok());
        assert!(SparsityPattern::new(vec![3, 0]).check_against(&p).is_err());
        assert!(SparsityPattern::new(vec![1]).check_against(&p).is_err());
        assert_eq!(SparsityPattern::parse("2, 3").unwrap().total(), 5);
        assert!(SparsityPattern::new(vec![0, 0]).is_zero());
    }
}
