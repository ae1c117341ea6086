use nalgebra::{DMatrix, DVector};

use super::rotation::rotate_canonical;
use crate::error::{LinfaError, Result};
use crate::linalg;
use crate::model::{DatasetCollection, FactorParams};
use crate::scalar::Real;

/// Lower bound applied to start-value noise variances of constant variables.
const START_PSI_FLOOR: f64 = 1e-6;

/// Stacks all datasets into one `n x d` matrix, filling every unobserved
/// entry with the pooled observed mean of its variable.
pub fn simple_fill<T: Real>(data: &DatasetCollection<T>) -> DMatrix<T> {
    let means = data.pooled_means();
    let d = data.d();
    let mut filled = DMatrix::<T>::zeros(data.total_rows(), d);
    let mut offset = 0;
    for (x, subset) in data.matrices().iter().zip(data.pattern().subsets()) {
        let n = x.nrows();
        let mut rows = filled.rows_mut(offset, n);
        for j in 0..d {
            rows.column_mut(j).fill(means[j]);
        }
        for (c, &v) in subset.iter().enumerate() {
            rows.column_mut(v).copy_from(&x.column(c));
        }
        offset += n;
    }
    filled
}

/// Start values from the leading eigenpairs of the mean-filled sample
/// covariance, with `Psi_0 = Diag(covariance)` and the canonical rotation.
pub fn start_values<T: Real>(data: &DatasetCollection<T>, q: usize) -> Result<FactorParams<T>> {
    let d = data.d();
    if q == 0 || q >= d {
        return Err(LinfaError::InvalidConfig(format!(
            "number of factors must satisfy 1 <= q < d (q={q}, d={d})"
        )));
    }
    if data.total_rows() < 2 {
        return Err(LinfaError::InvalidData(
            "start values need at least 2 samples in total".into(),
        ));
    }
    let filled = simple_fill(data);
    let cov = linalg::sample_covariance(&filled);
    let (values, vectors) = linalg::symmetric_eigen_desc(&cov);
    let mut lambda = DMatrix::<T>::zeros(d, q);
    for f in 0..q {
        let scale = values[f].max(T::zero()).sqrt();
        lambda.set_column(f, &(vectors.column(f) * scale));
    }
    let floor = T::of(START_PSI_FLOOR);
    let psi = DVector::from_iterator(d, (0..d).map(|i| cov[(i, i)].max(floor)));
    let unrotated = FactorParams::new(lambda, psi)?;
    Ok(rotate_canonical(&unrotated))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ObservationPattern;
    use crate::testutil::{random_data, random_params};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn complete_data_gives_best_rank_q_approximation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let truth = random_params(&mut rng, 7, 2);
        let pattern = ObservationPattern::complete(7).unwrap();
        let data = random_data(&mut rng, &truth, &pattern, &[60]);
        let start = start_values(&data, 2).unwrap();

        let cov = linalg::sample_covariance(data.matrix(0));
        // Eckart-Young via SVD of the (PSD) covariance.
        let svd = cov.clone().svd(true, true);
        let mut idx: Vec<usize> = (0..7).collect();
        idx.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap());
        let u = svd.u.unwrap();
        let mut best = DMatrix::<f64>::zeros(7, 7);
        for &i in &idx[..2] {
            best += u.column(i) * u.column(i).transpose() * svd.singular_values[i];
        }
        let approx = start.lambda() * start.lambda().transpose();
        assert!((approx - best).abs().max() < 1e-10);
        for i in 0..7 {
            assert_eq!(start.psi()[i], cov[(i, i)]);
        }
    }

    #[test]
    fn diagonal_covariance_case() {
        // Columns with distinct scales and exactly zero sample correlation.
        let x = DMatrix::from_row_slice(
            4,
            3,
            &[
                3.0, 2.0, 1.0, //
                -3.0, 2.0, -1.0, //
                3.0, -2.0, -1.0, //
                -3.0, -2.0, 1.0,
            ],
        );
        let data = DatasetCollection::new(ObservationPattern::complete(3).unwrap(), vec![x]).unwrap();
        let start = start_values(&data, 1).unwrap();
        let phi1: f64 = 12.0;
        assert!((start.lambda()[(0, 0)] - phi1.sqrt()).abs() < 1e-12);
        assert!(start.lambda()[(1, 0)].abs() < 1e-12);
        assert!(start.lambda()[(2, 0)].abs() < 1e-12);
        assert_eq!(start.psi().as_slice(), &[12.0, 16.0 / 3.0, 4.0 / 3.0]);
    }

    #[test]
    fn fill_uses_pooled_means() {
        let pattern = ObservationPattern::new(3, vec![vec![0, 1], vec![1, 2]]).unwrap();
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = DMatrix::from_row_slice(1, 2, &[9.0, 5.0]);
        let data = DatasetCollection::new(pattern, vec![a, b]).unwrap();
        let filled = simple_fill(&data);
        assert_eq!(filled.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 2.0, 5.0]);
        assert_eq!(filled.row(2).iter().copied().collect::<Vec<_>>(), vec![2.0, 9.0, 5.0]);
    }

    #[test]
    fn rejects_bad_q_and_tiny_data() {
        let pattern = ObservationPattern::complete(3).unwrap();
        let one = DatasetCollection::new(pattern.clone(), vec![DMatrix::<f64>::zeros(1, 3)]).unwrap();
        assert!(start_values(&one, 1).is_err());
        let two = DatasetCollection::new(pattern, vec![DMatrix::from_element(2, 3, 1.0)]).unwrap();
        assert!(start_values(&two, 3).is_err());
        assert!(start_values(&two, 0).is_err());
    }
}
