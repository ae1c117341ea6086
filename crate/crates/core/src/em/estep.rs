use nalgebra::DMatrix;

use crate::covariance::Capacitance;
use crate::error::Result;
use crate::model::{DatasetCollection, FactorParams};
use crate::scalar::Real;

/// Posterior moments of the latent factors for one dataset.
#[derive(Debug, Clone)]
pub struct DatasetStats<T: Real> {
    /// `A = Psi_k^{-1} Lambda_k`, `|V_k| x q`.
    pub a: DMatrix<T>,
    /// `B = A^T Lambda_k`, `q x q`.
    pub b: DMatrix<T>,
    /// `Gamma = A (I - (I + B)^{-1} B)`, `|V_k| x q`.
    pub gamma: DMatrix<T>,
    /// Posterior factor means `X_k Gamma`, `n_k x q`.
    pub m: DMatrix<T>,
    /// `n_k (I - Gamma^T Lambda_k) + M^T M`, `q x q`.
    pub s: DMatrix<T>,
}

#[derive(Debug, Clone)]
pub struct EStepStats<T: Real> {
    pub datasets: Vec<DatasetStats<T>>,
}

impl<T: Real> EStepStats<T> {
    pub fn q(&self) -> usize {
        self.datasets[0].s.nrows()
    }
}

pub fn dataset_stats<T: Real>(restricted: &FactorParams<T>, x: &DMatrix<T>) -> Result<DatasetStats<T>> {
    let cap = Capacitance::new(restricted)?;
    let gamma = cap.gamma();
    let m = x * &gamma;
    let q = restricted.q();
    let n = T::of_usize(x.nrows());
    let mut s = (DMatrix::<T>::identity(q, q) - gamma.transpose() * restricted.lambda()) * n
        + m.transpose() * &m;
    // I - Gamma^T Lambda is symmetric in exact arithmetic.
    s = (&s + s.transpose()) * T::of(0.5);
    Ok(DatasetStats {
        a: cap.a,
        b: cap.b,
        gamma,
        m,
        s,
    })
}

pub fn e_step<T: Real>(params: &FactorParams<T>, data: &DatasetCollection<T>) -> Result<EStepStats<T>> {
    let datasets = data
        .matrices()
        .iter()
        .enumerate()
        .map(|(k, x)| dataset_stats(&params.restrict(data.pattern().subset(k))?, x))
        .collect::<Result<Vec<_>>>()?;
    Ok(EStepStats { datasets })
}
