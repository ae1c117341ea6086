//! Linked factor analysis.
//!
//! Estimates a Gaussian factor model `Sigma = Lambda Lambda^T + Psi` from
//! several datasets that each record a different subset of the variables, so
//! that some variable pairs are never observed together. The estimate fills in
//! the whole covariance matrix and supports factor prediction, data
//! completion, partial-correlation and factor graphs, model selection and
//! bootstrap standard errors.
//!
//! The numerical core is generic over the scalar type through [`Real`]
//! (implemented for `f32` and `f64`); the aliases at the crate root fix it to
//! `f64`, which is what the command-line tool uses.

pub mod bootstrap;
pub mod completion;
pub mod covariance;
pub mod em;
pub mod error;
pub mod gvt;
pub mod linalg;
pub mod model;
pub mod scalar;
pub mod selection;
pub mod sim;

#[cfg(test)]
mod testutil;

pub use covariance::{
    assemble_covariance, correlation_matrix, factor_variable_correlations, log_likelihood,
    partial_correlations, precision_woodbury,
};
pub use em::{fit, FitConfig, FitResult, Start};
pub use error::{LinfaError, Result};
pub use gvt::{tessellate, VertexPartition};
pub use model::{DatasetCollection, FactorParams, ObservationPattern, PairSet};
pub use scalar::Real;

pub type FactorParams64 = FactorParams<f64>;
pub type FactorParams32 = FactorParams<f32>;
pub type Datasets64 = DatasetCollection<f64>;
pub type Datasets32 = DatasetCollection<f32>;
pub type FitConfig64 = FitConfig<f64>;
pub type FitResult64 = FitResult<f64>;
