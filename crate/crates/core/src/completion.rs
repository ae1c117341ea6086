//! Uses of a fitted model: latent factor prediction, data completion,
//! partial-correlation graphs and factor graphs.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::covariance::{factor_variable_correlations, partial_correlations, precision_woodbury, Capacitance};
use crate::error::{LinfaError, Result};
use crate::model::{DatasetCollection, FactorParams};
use crate::scalar::Real;

/// Factor predictor for one observed subset: `z = Lambda_V^T Sigma_V^{-1} x = Gamma^T x`.
#[derive(Debug, Clone)]
pub struct FactorPredictor<T: Real> {
    gamma: DMatrix<T>,
}

impl<T: Real> FactorPredictor<T> {
    pub fn new(params: &FactorParams<T>, subset: &[usize]) -> Result<Self> {
        let restricted = params.restrict(subset)?;
        Ok(Self {
            gamma: Capacitance::new(&restricted)?.gamma(),
        })
    }

    pub fn gamma(&self) -> &DMatrix<T> {
        &self.gamma
    }

    pub fn predict(&self, x: &DVector<T>) -> Result<DVector<T>> {
        if x.len() != self.gamma.nrows() {
            return Err(LinfaError::Shape(format!(
                "observation has {} entries, subset has {}",
                x.len(),
                self.gamma.nrows()
            )));
        }
        Ok(self.gamma.tr_mul(x))
    }

    /// Predicted factors for every row of `x`, `n x q`.
    pub fn predict_rows(&self, x: &DMatrix<T>) -> Result<DMatrix<T>> {
        if x.ncols() != self.gamma.nrows() {
            return Err(LinfaError::Shape(format!(
                "data has {} columns, subset has {}",
                x.ncols(),
                self.gamma.nrows()
            )));
        }
        Ok(x * &self.gamma)
    }
}

pub fn predict_factors<T: Real>(params: &FactorParams<T>, subset: &[usize], x: &DVector<T>) -> Result<DVector<T>> {
    FactorPredictor::new(params, subset)?.predict(x)
}

/// Predicted factors for every sample, datasets stacked in order.
pub fn predict_dataset_factors<T: Real>(params: &FactorParams<T>, data: &DatasetCollection<T>) -> Result<DMatrix<T>> {
    let mut out = DMatrix::<T>::zeros(data.total_rows(), params.q());
    let mut offset = 0;
    for (k, x) in data.matrices().iter().enumerate() {
        let z = FactorPredictor::new(params, data.pattern().subset(k))?.predict_rows(x)?;
        out.rows_mut(offset, x.nrows()).copy_from(&z);
        offset += x.nrows();
    }
    Ok(out)
}

/// A completed sample; `predicted[i]` marks entries filled in by the model.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletedSample<T: Real> {
    pub values: DVector<T>,
    pub predicted: Vec<bool>,
}

/// Keeps observed entries verbatim and fills the rest with `Lambda z_hat`.
///
/// An empty subset gives `z_hat = 0`, so every entry is predicted as zero.
pub fn complete_sample<T: Real>(params: &FactorParams<T>, x: &DVector<T>, subset: &[usize]) -> Result<CompletedSample<T>> {
    let d = params.d();
    let z = if subset.is_empty() {
        DVector::zeros(params.q())
    } else {
        predict_factors(params, subset, x)?
    };
    let fitted = params.lambda() * z;
    let mut values = fitted;
    let mut predicted = vec![true; d];
    for (c, &v) in subset.iter().enumerate() {
        values[v] = x[c];
        predicted[v] = false;
    }
    Ok(CompletedSample { values, predicted })
}

/// Completes every row of every dataset; rows are stacked in dataset order.
/// Returns the `n x d` matrix and the matching predicted-entry mask.
pub fn complete_datasets<T: Real>(
    params: &FactorParams<T>,
    data: &DatasetCollection<T>,
) -> Result<(DMatrix<T>, Vec<Vec<bool>>)> {
    let d = data.d();
    let mut out = DMatrix::<T>::zeros(data.total_rows(), d);
    let mut mask = Vec::with_capacity(data.total_rows());
    let mut offset = 0;
    for (k, x) in data.matrices().iter().enumerate() {
        let subset = data.pattern().subset(k);
        let z = FactorPredictor::new(params, subset)?.predict_rows(x)?;
        let fitted = z * params.lambda().transpose();
        let mut row_mask = vec![true; d];
        for &v in subset {
            row_mask[v] = false;
        }
        for r in 0..x.nrows() {
            let mut row = out.row_mut(offset + r);
            row.copy_from(&fitted.row(r));
            for (c, &v) in subset.iter().enumerate() {
                row[v] = x[(r, c)];
            }
            mask.push(row_mask.clone());
        }
        offset += x.nrows();
    }
    Ok((out, mask))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    PartialCorrelation,
    FactorGraph,
}

/// An edge between variables `a` and `b` (partial-correlation graph) or
/// between variable `a` and factor `b` (factor graph). Indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphEdges {
    pub kind: GraphKind,
    pub variables: usize,
    pub factors: usize,
    pub edges: Vec<Edge>,
}

impl GraphEdges {
    /// True when no returned edge has a nonzero weight.
    pub fn is_empty_graph(&self) -> bool {
        self.edges.iter().all(|e| e.weight == 0.0)
    }
}

/// Sorts by `|weight|` descending, then `(a, b)` ascending, and keeps `top_m`.
fn top_edges(mut edges: Vec<Edge>, top_m: usize) -> Vec<Edge> {
    edges.sort_by(|x, y| {
        y.weight
            .abs()
            .partial_cmp(&x.weight.abs())
            .unwrap_or(Ordering::Equal)
            .then(x.a.cmp(&y.a))
            .then(x.b.cmp(&y.b))
    });
    edges.truncate(top_m);
    edges
}

pub fn partial_correlation_graph<T: Real>(params: &FactorParams<T>, top_m: usize) -> Result<GraphEdges> {
    let d = params.d();
    let budget = d * (d - 1) / 2;
    if top_m > budget {
        return Err(LinfaError::InvalidConfig(format!(
            "requested {top_m} edges, only {budget} variable pairs exist"
        )));
    }
    let rho = partial_correlations(&precision_woodbury(params)?)?;
    let mut edges = Vec::with_capacity(budget);
    for i in 0..d {
        for j in i + 1..d {
            edges.push(Edge {
                a: i,
                b: j,
                weight: rho[(i, j)].as_f64(),
            });
        }
    }
    Ok(GraphEdges {
        kind: GraphKind::PartialCorrelation,
        variables: d,
        factors: 0,
        edges: top_edges(edges, top_m),
    })
}

pub fn factor_graph<T: Real>(params: &FactorParams<T>, top_m: usize) -> Result<GraphEdges> {
    let (d, q) = (params.d(), params.q());
    if top_m > d * q {
        return Err(LinfaError::InvalidConfig(format!(
            "requested {top_m} edges, only {} variable-factor pairs exist",
            d * q
        )));
    }
    let gamma = factor_variable_correlations(params);
    let mut edges = Vec::with_capacity(d * q);
    for i in 0..d {
        for j in 0..q {
            edges.push(Edge {
                a: i,
                b: j,
                weight: gamma[(i, j)].as_f64(),
            });
        }
    }
    Ok(GraphEdges {
        kind: GraphKind::FactorGraph,
        variables: d,
        factors: q,
        edges: top_edges(edges, top_m),
    })
}

/// Position of each factor as the `|gamma|`-weighted mean of variable coordinates.
pub fn factor_positions<T: Real>(gamma: &DMatrix<T>, coords: &DMatrix<T>) -> Result<DMatrix<T>> {
    if coords.nrows() != gamma.nrows() {
        return Err(LinfaError::Shape(format!(
            "{} coordinates for {} variables",
            coords.nrows(),
            gamma.nrows()
        )));
    }
    let weights = gamma.abs();
    let mut out = DMatrix::<T>::zeros(gamma.ncols(), coords.ncols());
    for j in 0..gamma.ncols() {
        let w = weights.column(j);
        let total = w.sum();
        if !(total > T::zero()) {
            return Err(LinfaError::Degenerate(format!(
                "factor {} has no nonzero loading correlations",
                j + 1
            )));
        }
        let pos = coords.tr_mul(&w) / total;
        out.row_mut(j).copy_from(&pos.transpose());
    }
    Ok(out)
}
