//! Small dense helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{LinfaError, Result};
use crate::scalar::Real;

/// Cholesky factorization that also rejects pivots below [`Real::pivot_floor`].
pub fn cholesky<T: Real>(m: DMatrix<T>, context: &str) -> Result<Cholesky<T, Dyn>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(LinfaError::NotPositiveDefinite(format!(
            "{context}: non-finite entry"
        )));
    }
    let chol = Cholesky::new(m)
        .ok_or_else(|| LinfaError::NotPositiveDefinite(context.to_string()))?;
    let floor = T::pivot_floor();
    if chol.l_dirty().diagonal().iter().any(|&v| v < floor) {
        return Err(LinfaError::NotPositiveDefinite(format!(
            "{context}: pivot below {floor:e}"
        )));
    }
    Ok(chol)
}

/// `log det` from a Cholesky factor.
pub fn log_det<T: Real>(chol: &Cholesky<T, Dyn>) -> T {
    let two = T::of(2.0);
    chol.l_dirty().diagonal().iter().fold(T::zero(), |acc, &v| acc + two * v.ln())
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted in
/// descending order. Columns of the returned matrix are the eigenvectors.
pub fn symmetric_eigen_desc<T: Real>(m: &DMatrix<T>) -> (DVector<T>, DMatrix<T>) {
    let sym = (m + m.transpose()) * T::of(0.5);
    let eig = sym.symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = eig.eigenvectors.select_columns(order.iter());
    (values, vectors)
}

/// Sample covariance with the given column means removed and divisor `n - 1`.
pub fn sample_covariance<T: Real>(x: &DMatrix<T>) -> DMatrix<T> {
    let n = x.nrows();
    let means = x.row_mean();
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= &means;
    }
    let denom = T::of_usize(n.saturating_sub(1).max(1));
    (centered.transpose() * &centered) / denom
}
