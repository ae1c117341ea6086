//! Group vertex tessellation: the coarsest partition of the variables such
//! that every block is observed by exactly the same datasets.
//!
//! Grouping is done by hashing each variable's dataset-incidence row, which
//! gives the same blocks as comparing all rows pairwise by their l1 distance.

use std::collections::HashMap;

use crate::model::ObservationPattern;

/// Blocks `W_1..W_J` with their covering datasets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexPartition {
    /// Disjoint variable blocks, each sorted, ordered by smallest member.
    pub blocks: Vec<Vec<usize>>,
    /// `covers[j]` lists the datasets `k` with `blocks[j]` contained in `V_k`.
    pub covers: Vec<Vec<usize>>,
    /// Pooled sample count per block; empty until [`assign_sizes`](Self::assign_sizes).
    pub pooled_n: Vec<usize>,
}

impl VertexPartition {
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Fills `pooled_n[j] = sum of sizes[k] over k in covers[j]`.
    pub fn assign_sizes(&mut self, sizes: &[usize]) {
        self.pooled_n = self
            .covers
            .iter()
            .map(|cover| cover.iter().map(|&k| sizes[k]).sum())
            .collect();
    }
}

pub fn tessellate(pattern: &ObservationPattern) -> VertexPartition {
    let d = pattern.d();
    let k = pattern.k();
    let words = k.div_ceil(64);
    let mut incidence = vec![vec![0u64; words]; d];
    for (ds, subset) in pattern.subsets().iter().enumerate() {
        for &i in subset {
            incidence[i][ds / 64] |= 1 << (ds % 64);
        }
    }

    let mut index: HashMap<&[u64], usize> = HashMap::new();
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut signatures: Vec<&[u64]> = Vec::new();
    for (i, row) in incidence.iter().enumerate() {
        if row.iter().all(|&w| w == 0) {
            continue;
        }
        let j = *index.entry(row.as_slice()).or_insert_with(|| {
            blocks.push(Vec::new());
            signatures.push(row.as_slice());
            blocks.len() - 1
        });
        blocks[j].push(i);
    }

    let covers = signatures
        .iter()
        .map(|sig| (0..k).filter(|&ds| sig[ds / 64] >> (ds % 64) & 1 == 1).collect())
        .collect();

    VertexPartition {
        blocks,
        covers,
        pooled_n: Vec::new(),
    }
}
