//! M-step updates, blocked by the vertex tessellation.

use nalgebra::{DMatrix, DVector};

use super::estep::EStepStats;
use crate::error::{LinfaError, Result};
use crate::gvt::VertexPartition;
use crate::linalg;
use crate::model::{DatasetCollection, FactorParams};
use crate::scalar::Real;

/// Iteration-invariant quantities for the blocked M-step: the partition with
/// pooled sizes, the local column of every block variable inside each covering
/// dataset, and the scaled second moments `D_W`.
#[derive(Debug, Clone)]
pub struct BlockPlan<T: Real> {
    pub partition: VertexPartition,
    /// `columns[j][c]` are the columns of dataset `partition.covers[j][c]`
    /// holding the variables of block `j`, in block order.
    columns: Vec<Vec<Vec<usize>>>,
    /// Diagonal of `D_W = (1/n_W) Diag(sum_k X_W^T X_W)` per block.
    pub second_moments: Vec<DVector<T>>,
}

impl<T: Real> BlockPlan<T> {
    pub fn new(data: &DatasetCollection<T>, mut partition: VertexPartition) -> Self {
        partition.assign_sizes(&data.sizes());
        let d = data.d();
        let positions: Vec<Vec<Option<usize>>> = data
            .pattern()
            .subsets()
            .iter()
            .map(|subset| {
                let mut pos = vec![None; d];
                for (c, &v) in subset.iter().enumerate() {
                    pos[v] = Some(c);
                }
                pos
            })
            .collect();

        let columns: Vec<Vec<Vec<usize>>> = partition
            .blocks
            .iter()
            .zip(&partition.covers)
            .map(|(block, cover)| {
                cover
                    .iter()
                    .map(|&k| {
                        block
                            .iter()
                            .map(|&v| positions[k][v].expect("cover contains block"))
                            .collect()
                    })
                    .collect()
            })
            .collect();

        let second_moments = partition
            .blocks
            .iter()
            .enumerate()
            .map(|(j, block)| {
                let mut acc = DVector::<T>::zeros(block.len());
                for (c, &k) in partition.covers[j].iter().enumerate() {
                    let x = data.matrix(k);
                    for (b, &col) in columns[j][c].iter().enumerate() {
                        acc[b] += x.column(col).norm_squared();
                    }
                }
                acc / T::of_usize(partition.pooled_n[j])
            })
            .collect();

        Self {
            partition,
            columns,
            second_moments,
        }
    }

    /// Fails when a block pools too few samples to identify `q` factors.
    pub fn check_identifiable(&self, q: usize) -> Result<()> {
        for (j, (&n, block)) in self
            .partition
            .pooled_n
            .iter()
            .zip(&self.partition.blocks)
            .enumerate()
        {
            if n <= q {
                return Err(degenerate(j, block, n, q));
            }
        }
        Ok(())
    }
}

fn degenerate(j: usize, block: &[usize], pooled_n: usize, q: usize) -> LinfaError {
    LinfaError::DegenerateBlock {
        block: j + 1,
        first: block[0] + 1,
        last: block[block.len() - 1] + 1,
        pooled_n,
        q,
    }
}

/// Closed-form maximizer of the expected complete log-likelihood, computed
/// block by block. Noise variances are floored at `psi_floor`.
pub fn m_step<T: Real>(
    stats: &EStepStats<T>,
    data: &DatasetCollection<T>,
    plan: &BlockPlan<T>,
    psi_floor: T,
) -> Result<FactorParams<T>> {
    let q = stats.q();
    let d = data.d();
    // X_k^T M_k for every dataset, |V_k| x q.
    let cross: Vec<DMatrix<T>> = data
        .matrices()
        .iter()
        .zip(&stats.datasets)
        .map(|(x, st)| x.transpose() * &st.m)
        .collect();

    let mut lambda = DMatrix::<T>::zeros(d, q);
    let mut psi = DVector::<T>::zeros(d);
    let part = &plan.partition;
    for (j, block) in part.blocks.iter().enumerate() {
        let mut s_w = DMatrix::<T>::zeros(q, q);
        let mut p_w = DMatrix::<T>::zeros(block.len(), q);
        for (c, &k) in part.covers[j].iter().enumerate() {
            s_w += &stats.datasets[k].s;
            for (b, &col) in plan.columns[j][c].iter().enumerate() {
                let mut row = p_w.row_mut(b);
                row += cross[k].row(col);
            }
        }
        let n_w = part.pooled_n[j];
        let chol = linalg::cholesky(s_w.clone(), "pooled factor second moment")
            .map_err(|_| degenerate(j, block, n_w, q))?;
        // Lambda_W = P_W S_W^{-1}; S_W is symmetric.
        let lambda_w = chol.solve(&p_w.transpose()).transpose();
        let inv_n = T::one() / T::of_usize(n_w);
        for (b, &v) in block.iter().enumerate() {
            let row = lambda_w.row(b);
            let explained = (row * &s_w).dot(&row);
            let value = plan.second_moments[j][b] - explained * inv_n;
            psi[v] = if value > psi_floor { value } else { psi_floor };
            lambda.row_mut(v).copy_from(&row);
        }
    }
    FactorParams::new(lambda, psi)
}

/// Unblocked reference update: every variable is updated on its own from all
/// datasets that observe it. Produces the same parameters as [`m_step`].
pub fn m_step_per_vertex<T: Real>(
    stats: &EStepStats<T>,
    data: &DatasetCollection<T>,
    psi_floor: T,
) -> Result<FactorParams<T>> {
    let q = stats.q();
    let d = data.d();
    let mut lambda = DMatrix::<T>::zeros(d, q);
    let mut psi = DVector::<T>::zeros(d);
    for v in 0..d {
        let mut s_v = DMatrix::<T>::zeros(q, q);
        let mut p_v = DMatrix::<T>::zeros(1, q);
        let mut sq = T::zero();
        let mut n_v = 0usize;
        for (k, subset) in data.pattern().subsets().iter().enumerate() {
            let Some(col) = subset.iter().position(|&u| u == v) else {
                continue;
            };
            let x = data.matrix(k).column(col);
            s_v += &stats.datasets[k].s;
            p_v += x.transpose() * &stats.datasets[k].m;
            sq += x.norm_squared();
            n_v += x.len();
        }
        let chol = linalg::cholesky(s_v.clone(), "per-vertex factor second moment")?;
        let row = chol.solve(&p_v.transpose()).transpose();
        let explained = (&row * &s_v).dot(&row);
        let value = (sq - explained) / T::of_usize(n_v);
        psi[v] = if value > psi_floor { value } else { psi_floor };
        lambda.row_mut(v).copy_from(&row);
    }
    FactorParams::new(lambda, psi)
}
