//! Random instances and dense oracles shared by unit tests.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::model::{DatasetCollection, FactorParams, ObservationPattern};

pub fn random_params<R: Rng>(rng: &mut R, d: usize, q: usize) -> FactorParams<f64> {
    let lambda = DMatrix::from_fn(d, q, |_, _| rng.sample::<f64, _>(StandardNormal));
    let psi = DVector::from_fn(d, |_, _| 0.2 + 2.0 * rng.random::<f64>());
    FactorParams::new(lambda, psi).unwrap()
}

/// Random orthogonal matrix from the QR factor of a Gaussian matrix.
pub fn random_rotation<R: Rng>(rng: &mut R, q: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(q, q, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}

/// Draws `n_k` samples per dataset from the factor model.
pub fn random_data<R: Rng>(
    rng: &mut R,
    params: &FactorParams<f64>,
    pattern: &ObservationPattern,
    sizes: &[usize],
) -> DatasetCollection<f64> {
    let (d, q) = (params.d(), params.q());
    let mats = pattern
        .subsets()
        .iter()
        .zip(sizes)
        .map(|(subset, &n)| {
            let z = DMatrix::from_fn(n, q, |_, _| rng.sample::<f64, _>(StandardNormal));
            let e = DMatrix::from_fn(n, d, |_, j| {
                rng.sample::<f64, _>(StandardNormal) * params.psi()[j].sqrt()
            });
            let full = z * params.lambda().transpose() + e;
            full.select_columns(subset.iter())
        })
        .collect();
    DatasetCollection::new(pattern.clone(), mats).unwrap()
}

/// Sum of multivariate normal log-densities via a dense inverse and determinant.
pub fn dense_gaussian_loglik(sigma: &DMatrix<f64>, x: &DMatrix<f64>) -> f64 {
    let m = sigma.nrows() as f64;
    let inv = sigma.clone().try_inverse().unwrap();
    let det = sigma.determinant();
    x.row_iter()
        .map(|row| {
            let v = row.transpose();
            let quad = (v.transpose() * &inv * &v)[(0, 0)];
            -0.5 * (m * (2.0 * std::f64::consts::PI).ln() + det.ln() + quad)
        })
        .sum()
}
