use crate::error::Result;
use crate::model::{DatasetCollection, FactorParams};
use crate::scalar::Real;

use super::estep::EStepStats;

/// Expected complete-data log-likelihood `Q_t(Lambda, Psi)` for E-step
/// statistics computed at iterate `t`, with the parameter-free constant dropped:
///
/// `-1/2 sum_k [ n_k log det Psi_k + tr(X^T X Psi^{-1}) + tr(S Lambda^T Psi^{-1} Lambda)
///               - 2 tr(M Lambda^T Psi^{-1} X^T) ]`
pub fn q_function<T: Real>(
    params: &FactorParams<T>,
    stats: &EStepStats<T>,
    data: &DatasetCollection<T>,
) -> Result<T> {
    let mut total = T::zero();
    for (k, (x, st)) in data.matrices().iter().zip(&stats.datasets).enumerate() {
        let r = params.restrict(data.pattern().subset(k))?;
        let (lambda, psi) = (r.lambda(), r.psi());
        let n = T::of_usize(x.nrows());
        let cross = x.transpose() * &st.m;
        let mut term = T::zero();
        for j in 0..psi.len() {
            let inv = T::one() / psi[j];
            let row = lambda.row(j);
            term += n * psi[j].ln();
            term += x.column(j).norm_squared() * inv;
            term += (row * &st.s).dot(&row) * inv;
            term -= T::of(2.0) * cross.row(j).dot(&row) * inv;
        }
        total += term;
    }
    Ok(-total * T::of(0.5))
}
