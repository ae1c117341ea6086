use std::cmp::Ordering;

use nalgebra::DMatrix;

use crate::model::FactorParams;
use crate::scalar::Real;

/// Rotates the loadings so that `Lambda^T Psi^{-1} Lambda` is diagonal with
/// non-increasing diagonal, then flips each column so its largest-magnitude
/// entry is positive. `Psi` and `Lambda Lambda^T` are unchanged.
pub fn rotate_canonical<T: Real>(params: &FactorParams<T>) -> FactorParams<T> {
    let lambda = params.lambda();
    let (d, q) = (params.d(), params.q());
    let mut scaled = lambda.clone();
    for (i, mut row) in scaled.row_iter_mut().enumerate() {
        row /= params.psi()[i];
    }
    let inner = (lambda.transpose() * scaled) / T::of_usize(d);
    let sym = (&inner + inner.transpose()) * T::of(0.5);
    let eig = sym.symmetric_eigen();

    let mut rotated = lambda * &eig.eigenvectors;
    for mut col in rotated.column_iter_mut() {
        let mut pivot = 0;
        for i in 1..col.len() {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        if col[pivot] < T::zero() {
            col.neg_mut();
        }
    }

    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&a, &b| {
        let (ea, eb) = (eig.eigenvalues[a], eig.eigenvalues[b]);
        match eb.partial_cmp(&ea).unwrap_or(Ordering::Equal) {
            Ordering::Equal => compare_columns(&rotated, b, a),
            other => other,
        }
    });
    let lambda = rotated.select_columns(order.iter());
    FactorParams::new(lambda, params.psi().clone()).expect("rotation preserves validity")
}

/// Lexicographic comparison of two columns at their first differing entry.
fn compare_columns<T: Real>(m: &DMatrix<T>, a: usize, b: usize) -> Ordering {
    m.column(a)
        .iter()
        .zip(m.column(b).iter())
        .find(|(x, y)| x != y)
        .map(|(x, y)| x.partial_cmp(y).unwrap_or(Ordering::Equal))
        .unwrap_or(Ordering::Equal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::assemble_covariance;
    use crate::testutil::random_params;
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn inner(p: &FactorParams<f64>) -> DMatrix<f64> {
        let psi_inv = DMatrix::from_diagonal(&p.psi().map(|v| 1.0 / v));
        p.lambda().transpose() * psi_inv * p.lambda()
    }

    #[test]
    fn fixed_point_when_already_canonical() {
        // Orthogonal columns with descending norms under unit psi.
        let l = DMatrix::from_row_slice(3, 2, &[3.0, 0.0, 0.0, 1.0, 0.0, 0.5]);
        let p = FactorParams::new(l, DVector::from_element(3, 1.0)).unwrap();
        let r = rotate_canonical(&p);
        assert!((r.lambda() - p.lambda()).abs().max() < 1e-12);
    }

    #[test]
    fn diagonalizes_and_preserves_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let p = random_params(&mut rng, 9, 3);
            let r = rotate_canonical(&p);
            let m = inner(&r);
            for a in 0..3 {
                for b in 0..3 {
                    if a != b {
                        assert!(m[(a, b)].abs() < 1e-8);
                    }
                }
            }
            assert!(m[(0, 0)] >= m[(1, 1)] && m[(1, 1)] >= m[(2, 2)]);
            let diff = assemble_covariance(&p) - assemble_covariance(&r);
            assert!(diff.abs().max() < 1e-10);
            assert_eq!(r.psi(), p.psi());
        }
    }

    #[test]
    fn sign_convention_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let p = random_params(&mut rng, 6, 2);
        let r = rotate_canonical(&p);
        for col in r.lambda().column_iter() {
            let pivot = col.iamax();
            assert!(col[pivot] > 0.0);
        }
        let flipped = FactorParams::new(-p.lambda(), p.psi().clone()).unwrap();
        assert!((rotate_canonical(&flipped).lambda() - r.lambda()).abs().max() < 1e-10);
    }
}
