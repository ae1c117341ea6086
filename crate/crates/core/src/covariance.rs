//! Closed-form covariance, precision and correlation maps of a factor model,
//! plus the observed-data log-likelihood.
//!
//! Everything here avoids inverting a `d x d` matrix: inverses and
//! determinants of `Lambda Lambda^T + Psi` go through the `q x q` capacitance
//! matrix `I + Lambda^T Psi^{-1} Lambda`.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{LinfaError, Result};
use crate::linalg;
use crate::model::{DatasetCollection, FactorParams};
use crate::scalar::Real;

/// `Lambda Lambda^T + Diag(psi)`.
pub fn assemble_covariance<T: Real>(params: &FactorParams<T>) -> DMatrix<T> {
    let l = params.lambda();
    let mut sigma = l * l.transpose();
    for (i, &p) in params.psi().iter().enumerate() {
        sigma[(i, i)] += p;
    }
    sigma
}

/// Factored form of `(Lambda Lambda^T + Psi)^{-1}` for one set of parameters.
///
/// Holds `A = Psi^{-1} Lambda`, `B = A^T Lambda` and the Cholesky factor of
/// the capacitance `I + B`.
#[derive(Debug, Clone)]
pub struct Capacitance<T: Real> {
    pub(crate) a: DMatrix<T>,
    pub(crate) b: DMatrix<T>,
    pub(crate) chol: Cholesky<T, Dyn>,
}

impl<T: Real> Capacitance<T> {
    pub fn new(params: &FactorParams<T>) -> Result<Self> {
        let lambda = params.lambda();
        let psi = params.psi();
        let mut a = lambda.clone();
        for (i, mut row) in a.row_iter_mut().enumerate() {
            row /= psi[i];
        }
        let b = a.transpose() * lambda;
        let q = b.nrows();
        let cap = DMatrix::<T>::identity(q, q) + &b;
        let chol = linalg::cholesky(cap, "capacitance I + Lambda^T Psi^-1 Lambda")?;
        Ok(Self { a, b, chol })
    }

    /// `Psi^{-1} Lambda`.
    pub fn a(&self) -> &DMatrix<T> {
        &self.a
    }

    /// `Lambda^T Psi^{-1} Lambda`.
    pub fn b(&self) -> &DMatrix<T> {
        &self.b
    }

    /// `Gamma = A (I - (I + B)^{-1} B) = Sigma^{-1} Lambda`.
    pub fn gamma(&self) -> DMatrix<T> {
        let q = self.b.nrows();
        let inner = DMatrix::<T>::identity(q, q) - self.chol.solve(&self.b);
        &self.a * inner
    }

    /// `log det(I + B)`, which equals `log det Sigma - log det Psi`.
    pub fn log_det(&self) -> T {
        linalg::log_det(&self.chol)
    }
}

/// `Theta = Sigma^{-1}` through the Woodbury identity.
pub fn precision_woodbury<T: Real>(params: &FactorParams<T>) -> Result<DMatrix<T>> {
    let cap = Capacitance::new(params)?;
    let a = &cap.a;
    let mut theta = -(a * cap.chol.solve(&a.transpose()));
    for (i, &p) in params.psi().iter().enumerate() {
        theta[(i, i)] += T::one() / p;
    }
    // Symmetrize away rounding.
    let theta = (&theta + theta.transpose()) * T::of(0.5);
    Ok(theta)
}

/// `rho_ij = -Theta_ij / sqrt(Theta_ii Theta_jj)` with unit diagonal.
pub fn partial_correlations<T: Real>(theta: &DMatrix<T>) -> Result<DMatrix<T>> {
    if !theta.is_square() {
        return Err(LinfaError::Shape("precision matrix must be square".into()));
    }
    let d = theta.nrows();
    if let Some(i) = (0..d).find(|&i| !(theta[(i, i)] > T::zero())) {
        return Err(LinfaError::NonPositiveDiagonal(i));
    }
    let scale: Vec<T> = (0..d).map(|i| theta[(i, i)].sqrt()).collect();
    let mut rho = DMatrix::from_fn(d, d, |i, j| {
        let r = -theta[(i, j)] / (scale[i] * scale[j]);
        r.clamp(-T::one(), T::one())
    });
    rho.fill_diagonal(T::one());
    Ok(rho)
}

/// `gamma_ij = Lambda_ij / sqrt(Lambda_ij^2 + Psi_ii)`: correlation between
/// variable `i` and factor `j` given the other factors.
pub fn factor_variable_correlations<T: Real>(params: &FactorParams<T>) -> DMatrix<T> {
    let l = params.lambda();
    let psi = params.psi();
    DMatrix::from_fn(l.nrows(), l.ncols(), |i, j| {
        let v = l[(i, j)];
        v / (v * v + psi[i]).sqrt()
    })
}

/// Correlation matrix `diag(S)^{-1/2} S diag(S)^{-1/2}`.
pub fn correlation_matrix<T: Real>(sigma: &DMatrix<T>) -> Result<DMatrix<T>> {
    let d = sigma.nrows();
    if let Some(i) = (0..d).find(|&i| !(sigma[(i, i)] > T::zero())) {
        return Err(LinfaError::NonPositiveDiagonal(i));
    }
    let s: Vec<T> = (0..d).map(|i| sigma[(i, i)].sqrt()).collect();
    let mut c = DMatrix::from_fn(d, d, |i, j| sigma[(i, j)] / (s[i] * s[j]));
    c.fill_diagonal(T::one());
    Ok(c)
}

/// Gaussian log-likelihood of one mean-zero data matrix under the given
/// (already restricted) parameters. Constants included.
pub fn dataset_log_likelihood<T: Real>(params: &FactorParams<T>, x: &DMatrix<T>) -> Result<T> {
    if x.ncols() != params.d() {
        return Err(LinfaError::Shape(format!(
            "data has {} columns, parameters cover {} variables",
            x.ncols(),
            params.d()
        )));
    }
    let cap = Capacitance::new(params)?;
    let psi = params.psi();
    let n = T::of_usize(x.nrows());
    let m = params.d();

    let log_det_psi = psi.iter().fold(T::zero(), |acc, &p| acc + p.ln());
    let log_det = log_det_psi + cap.log_det();

    // sum_r x_r^T Psi^{-1} x_r
    let mut quad = T::zero();
    for (j, col) in x.column_iter().enumerate() {
        quad += col.norm_squared() / psi[j];
    }
    // minus tr((I+B)^{-1} (XA)^T (XA))
    let xa = x * &cap.a;
    let g = xa.transpose() * &xa;
    quad -= cap.chol.solve(&g).trace();

    let two_pi = T::two_pi();
    Ok(-(n * T::of_usize(m) * two_pi.ln() + n * log_det + quad) * T::of(0.5))
}

/// Observed-data log-likelihood summed over all datasets.
pub fn log_likelihood<T: Real>(params: &FactorParams<T>, data: &DatasetCollection<T>) -> Result<T> {
    if params.d() != data.d() {
        return Err(LinfaError::Shape(format!(
            "parameters have d={}, data has d={}",
            params.d(),
            data.d()
        )));
    }
    let mut total = T::zero();
    for (k, x) in data.matrices().iter().enumerate() {
        let restricted = params.restrict(data.pattern().subset(k))?;
        total += dataset_log_likelihood(&restricted, x)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ObservationPattern;
    use nalgebra::DVector;
    use crate::testutil::{dense_gaussian_loglik, random_params, random_rotation};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(l: &[f64], rows: usize, psi: &[f64]) -> FactorParams<f64> {
        FactorParams::new(
            DMatrix::from_row_slice(rows, l.len() / rows, l),
            DVector::from_row_slice(psi),
        )
        .unwrap()
    }

    fn max_abs(m: &DMatrix<f64>) -> f64 {
        m.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    #[test]
    fn zero_loading_covariance_is_psi() {
        let p = params(&[0.0; 6], 3, &[1.0, 1.0, 1.0]);
        assert_eq!(assemble_covariance(&p), DMatrix::identity(3, 3));
    }

    #[test]
    fn rank_one_covariance() {
        let p = params(&[1.0, 1.0], 2, &[1.0, 1.0]);
        let s = assemble_covariance(&p);
        assert_eq!(s, DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]));
    }

    #[test]
    fn covariance_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_params(&mut rng, 5, 2);
        let s = assemble_covariance(&p);
        let (l, psi) = (p.lambda(), p.psi());
        for i in 0..5 {
            for j in 0..5 {
                let mut v = 0.0;
                for f in 0..2 {
                    v += l[(i, f)] * l[(j, f)];
                }
                if i == j {
                    v += psi[i];
                }
                assert!((s[(i, j)] - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn precision_diagonal_case() {
        let p = params(&[0.0, 0.0, 0.0], 3, &[2.0, 4.0, 0.5]);
        let t = precision_woodbury(&p).unwrap();
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.25, 2.0]));
        assert!(max_abs(&(t - expected)) < 1e-15);
    }

    #[test]
    fn precision_two_by_two() {
        let p = params(&[1.0, 1.0], 2, &[1.0, 1.0]);
        let t = precision_woodbury(&p).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]) / 3.0;
        assert!(max_abs(&(t - expected)) < 1e-15);
    }

    #[test]
    fn precision_inverts_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = random_params(&mut rng, 20, 3);
        let t = precision_woodbury(&p).unwrap();
        let prod = t * assemble_covariance(&p);
        assert!(max_abs(&(prod - DMatrix::identity(20, 20))) < 1e-8);
    }

    #[test]
    fn partial_correlations_cases() {
        let diag = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let rho = partial_correlations(&diag).unwrap();
        assert_eq!(rho, DMatrix::identity(3, 3));

        let t = DMatrix::<f64>::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]);
        let rho = partial_correlations(&t).unwrap();
        assert!((rho[(0, 1)] - 0.5).abs() < 1e-15);

        let bad = DMatrix::from_row_slice(2, 2, &[0.0, 0.1, 0.1, 1.0]);
        assert!(matches!(
            partial_correlations(&bad),
            Err(LinfaError::NonPositiveDiagonal(0))
        ));
    }

    #[test]
    fn partial_correlations_match_dense_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_params(&mut rng, 12, 3);
        let rho = partial_correlations(&precision_woodbury(&p).unwrap()).unwrap();
        let dense = assemble_covariance(&p).try_inverse().unwrap();
        for i in 0..12 {
            for j in 0..12 {
                let expected = if i == j {
                    1.0
                } else {
                    -dense[(i, j)] / (dense[(i, i)] * dense[(j, j)]).sqrt()
                };
                assert!((rho[(i, j)] - expected).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn gamma_cases() {
        let p = params(&[0.0, 3f64.sqrt()], 1, &[1.0]);
        let g = factor_variable_correlations(&p);
        assert_eq!(g[(0, 0)], 0.0);
        assert!((g[(0, 1)] - 3f64.sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn gamma_matches_joint_gaussian_conditioning() {
        // Joint covariance of (X, Z) is [[Sigma, Lambda], [Lambda^T, I]].
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (d, q) = (6, 2);
        let p = random_params(&mut rng, d, q);
        let gamma = factor_variable_correlations(&p);
        let sigma = assemble_covariance(&p);
        let mut joint = DMatrix::<f64>::zeros(d + q, d + q);
        joint.view_mut((0, 0), (d, d)).copy_from(&sigma);
        joint.view_mut((0, d), (d, q)).copy_from(p.lambda());
        joint.view_mut((d, 0), (q, d)).copy_from(&p.lambda().transpose());
        joint.view_mut((d, d), (q, q)).fill_diagonal(1.0);
        for i in 0..d {
            for j in 0..q {
                let keep = [i, d + j];
                let cond: Vec<usize> = (0..q).filter(|&h| h != j).map(|h| d + h).collect();
                let s11 = joint.select_rows(keep.iter()).select_columns(keep.iter());
                let s12 = joint.select_rows(keep.iter()).select_columns(cond.iter());
                let s22 = joint.select_rows(cond.iter()).select_columns(cond.iter());
                let schur = if cond.is_empty() {
                    s11
                } else {
                    &s11 - &s12 * s22.try_inverse().unwrap() * s12.transpose()
                };
                let r = schur[(0, 1)] / (schur[(0, 0)] * schur[(1, 1)]).sqrt();
                assert!((gamma[(i, j)] - r).abs() < 1e-8, "{i},{j}");
            }
        }
    }

    #[test]
    fn loglik_standard_normal_at_zero() {
        let pattern = ObservationPattern::new(2, vec![vec![0, 1]]).unwrap();
        let p = params(&[0.0, 0.0], 2, &[1.0, 1.0]);
        let data = DatasetCollection::new(pattern, vec![DMatrix::zeros(1, 2)]).unwrap();
        let ll = log_likelihood(&p, &data).unwrap();
        // Two independent standard normals at zero.
        assert!((ll + (2.0 * std::f64::consts::PI).ln()).abs() < 1e-14);

        // One-variable restriction.
        let p1 = params(&[0.0], 1, &[1.0]);
        let ll1 = dataset_log_likelihood(&p1, &DMatrix::zeros(1, 1)).unwrap();
        assert!((ll1 + 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-15);
    }

    #[test]
    fn loglik_disjoint_datasets_add_up() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = random_params(&mut rng, 5, 2);
        let pattern = ObservationPattern::new(5, vec![vec![0, 1], vec![2, 3, 4]]).unwrap();
        let x1 = DMatrix::from_fn(7, 2, |_, _| rng.random::<f64>() - 0.5);
        let x2 = DMatrix::from_fn(4, 3, |_, _| rng.random::<f64>() - 0.5);
        let data = DatasetCollection::new(pattern, vec![x1.clone(), x2.clone()]).unwrap();
        let total = log_likelihood(&p, &data).unwrap();
        let a = dataset_log_likelihood(&p.restrict(&[0, 1]).unwrap(), &x1).unwrap();
        let b = dataset_log_likelihood(&p.restrict(&[2, 3, 4]).unwrap(), &x2).unwrap();
        assert!((total - (a + b)).abs() < 1e-12);
    }

    #[test]
    fn loglik_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let p = random_params(&mut rng, 10, 2);
        let subsets = vec![
            (0..6).collect::<Vec<_>>(),
            (3..9).collect(),
            vec![0, 2, 4, 7, 8, 9],
        ];
        let pattern = ObservationPattern::new(10, subsets.clone()).unwrap();
        let mats: Vec<_> = subsets
            .iter()
            .enumerate()
            .map(|(k, s)| DMatrix::from_fn(3 + k, s.len(), |_, _| 2.0 * rng.random::<f64>() - 1.0))
            .collect();
        let data = DatasetCollection::new(pattern, mats.clone()).unwrap();
        let ll = log_likelihood(&p, &data).unwrap();
        let sigma = assemble_covariance(&p);
        let oracle: f64 = subsets
            .iter()
            .zip(&mats)
            .map(|(s, x)| {
                let sk = sigma.select_rows(s.iter()).select_columns(s.iter());
                dense_gaussian_loglik(&sk, x)
            })
            .sum();
        assert!((ll - oracle).abs() < 1e-8, "{ll} vs {oracle}");
    }

    #[test]
    fn covariance_min_eigenvalue_bounded_by_psi() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let p = random_params(&mut rng, 8, 3);
            let eig = assemble_covariance(&p).symmetric_eigen();
            let min_eig = eig.eigenvalues.min();
            assert!(min_eig >= p.psi().min() - 1e-10);
        }
    }

    #[test]
    fn works_in_single_precision() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p: FactorParams<f32> = random_params(&mut rng, 6, 2).cast();
        let t = precision_woodbury(&p).unwrap();
        let prod = t * assemble_covariance(&p);
        let err = (prod - DMatrix::<f32>::identity(6, 6)).abs().max();
        assert!(err < 1e-4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn prop_partial_correlations_bounded(seed in any::<u64>(), d in 2usize..15, q in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_params(&mut rng, d, q);
            let rho = partial_correlations(&precision_woodbury(&p).unwrap()).unwrap();
            for i in 0..d {
                prop_assert_eq!(rho[(i, i)], 1.0);
                for j in 0..d {
                    prop_assert!(rho[(i, j)].abs() <= 1.0);
                    prop_assert!((rho[(i, j)] - rho[(j, i)]).abs() < 1e-14);
                }
            }
        }

        #[test]
        fn prop_loglik_rotation_invariant(seed in any::<u64>(), q in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = 7;
            let p = random_params(&mut rng, d, q);
            let r = random_rotation(&mut rng, q);
            let rotated = FactorParams::new(p.lambda() * r, p.psi().clone()).unwrap();
            let pattern = ObservationPattern::new(d, vec![(0..5).collect(), (2..7).collect()]).unwrap();
            let mats = vec![
                DMatrix::from_fn(6, 5, |_, _| rng.random::<f64>() - 0.5),
                DMatrix::from_fn(4, 5, |_, _| rng.random::<f64>() - 0.5),
            ];
            let data = DatasetCollection::new(pattern, mats).unwrap();
            let a = log_likelihood(&p, &data).unwrap();
            let b = log_likelihood(&rotated, &data).unwrap();
            prop_assert!((a - b).abs() < 1e-8);
        }

        #[test]
        fn prop_woodbury_identity(seed in any::<u64>(), d in 1usize..30, q in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_params(&mut rng, d, q);
            let prod = precision_woodbury(&p).unwrap() * assemble_covariance(&p);
            prop_assert!(max_abs(&(prod - DMatrix::identity(d, d))) < 1e-8);
        }
    }
}
