//! Domain types: factor parameters, observation patterns and dataset collections.
//!
//! Variable indices are 0-based throughout the library. File formats handled by
//! the command-line front end translate to and from 1-based indices.

use nalgebra::{DMatrix, DVector};

use crate::error::{LinfaError, Result};
use crate::scalar::Real;

/// Loading matrix and diagonal noise covariance of a Gaussian factor model.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorParams<T: Real> {
    lambda: DMatrix<T>,
    psi: DVector<T>,
}

impl<T: Real> FactorParams<T> {
    /// Builds a parameter pair, rejecting non-positive or non-finite noise
    /// variances and mismatched shapes.
    pub fn new(lambda: DMatrix<T>, psi: DVector<T>) -> Result<Self> {
        if lambda.nrows() != psi.len() {
            return Err(LinfaError::Shape(format!(
                "loading matrix has {} rows but psi has {} entries",
                lambda.nrows(),
                psi.len()
            )));
        }
        if lambda.nrows() == 0 || lambda.ncols() == 0 {
            return Err(LinfaError::InvalidParams(
                "loading matrix must have at least one row and one column".into(),
            ));
        }
        if let Some(i) = psi.iter().position(|&p| !(p > T::zero()) || !p.is_finite()) {
            return Err(LinfaError::NonPositiveDiagonal(i));
        }
        if lambda.iter().any(|v| !v.is_finite()) {
            return Err(LinfaError::InvalidParams("non-finite loading".into()));
        }
        Ok(Self { lambda, psi })
    }

    pub fn d(&self) -> usize {
        self.lambda.nrows()
    }

    pub fn q(&self) -> usize {
        self.lambda.ncols()
    }

    pub fn lambda(&self) -> &DMatrix<T> {
        &self.lambda
    }

    pub fn psi(&self) -> &DVector<T> {
        &self.psi
    }

    pub fn into_parts(self) -> (DMatrix<T>, DVector<T>) {
        (self.lambda, self.psi)
    }

    /// Rows of the loading matrix and entries of psi for `subset`, in subset order.
    pub fn restrict(&self, subset: &[usize]) -> Result<FactorParams<T>> {
        let d = self.d();
        if let Some(&bad) = subset.iter().find(|&&i| i >= d) {
            return Err(LinfaError::IndexOutOfRange { index: bad, d });
        }
        if subset.is_empty() {
            return Err(LinfaError::InvalidParams("empty restriction".into()));
        }
        let lambda = self.lambda.select_rows(subset.iter());
        let psi = DVector::from_iterator(subset.len(), subset.iter().map(|&i| self.psi[i]));
        Ok(FactorParams { lambda, psi })
    }

    /// Converts the scalar type, e.g. `f64` parameters to `f32`.
    pub fn cast<U: Real>(&self) -> FactorParams<U> {
        FactorParams {
            lambda: self.lambda.map(|v| U::of(v.as_f64())),
            psi: self.psi.map(|v| U::of(v.as_f64())),
        }
    }
}

/// The variable subsets observed by each dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationPattern {
    d: usize,
    subsets: Vec<Vec<usize>>,
}

impl ObservationPattern {
    /// Each subset must be sorted, duplicate-free, in range, hold more than one
    /// variable, and together the subsets must cover `0..d`.
    pub fn new(d: usize, subsets: Vec<Vec<usize>>) -> Result<Self> {
        if d == 0 {
            return Err(LinfaError::InvalidPattern("d must be positive".into()));
        }
        if subsets.is_empty() {
            return Err(LinfaError::InvalidPattern("no datasets".into()));
        }
        let mut covered = vec![false; d];
        for (k, subset) in subsets.iter().enumerate() {
            if subset.len() < 2 {
                return Err(LinfaError::InvalidPattern(format!(
                    "dataset {k} observes {} variable(s); at least 2 are required",
                    subset.len()
                )));
            }
            if subset.windows(2).any(|w| w[0] >= w[1]) {
                return Err(LinfaError::InvalidPattern(format!(
                    "dataset {k} indices are not strictly increasing"
                )));
            }
            for &i in subset {
                if i >= d {
                    return Err(LinfaError::IndexOutOfRange { index: i, d });
                }
                covered[i] = true;
            }
        }
        if let Some(i) = covered.iter().position(|c| !c) {
            return Err(LinfaError::InvalidPattern(format!(
                "variable {i} is not observed in any dataset"
            )));
        }
        Ok(Self { d, subsets })
    }

    /// A single dataset observing every variable.
    pub fn complete(d: usize) -> Result<Self> {
        Self::new(d, vec![(0..d).collect()])
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.subsets.len()
    }

    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    pub fn subset(&self, k: usize) -> &[usize] {
        &self.subsets[k]
    }

    pub fn pair_set(&self) -> PairSet {
        PairSet::from_pattern(self)
    }
}

/// Symmetric membership table of jointly observed variable pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairSet {
    d: usize,
    observed: Vec<bool>,
}

impl PairSet {
    pub fn from_pattern(pattern: &ObservationPattern) -> Self {
        let d = pattern.d();
        let mut observed = vec![false; d * d];
        for subset in pattern.subsets() {
            for &i in subset {
                for &j in subset {
                    observed[i * d + j] = true;
                }
            }
        }
        Self { d, observed }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.observed[i * self.d + j]
    }

    /// Number of ordered pairs never observed jointly.
    pub fn unobserved_count(&self) -> usize {
        self.observed.iter().filter(|o| !**o).count()
    }

    /// Pairwise missingness proportion `|O^c| / d^2`.
    pub fn eta(&self) -> f64 {
        self.unobserved_count() as f64 / (self.d * self.d) as f64
    }
}

/// Datasets aligned with an observation pattern. Column `j` of matrix `k`
/// holds samples of variable `pattern.subset(k)[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetCollection<T: Real> {
    pattern: ObservationPattern,
    matrices: Vec<DMatrix<T>>,
}

impl<T: Real> DatasetCollection<T> {
    pub fn new(pattern: ObservationPattern, matrices: Vec<DMatrix<T>>) -> Result<Self> {
        if matrices.len() != pattern.k() {
            return Err(LinfaError::InvalidData(format!(
                "{} matrices for {} datasets",
                matrices.len(),
                pattern.k()
            )));
        }
        for (k, m) in matrices.iter().enumerate() {
            if m.nrows() == 0 {
                return Err(LinfaError::InvalidData(format!("dataset {k} has no rows")));
            }
            if m.ncols() != pattern.subset(k).len() {
                return Err(LinfaError::InvalidData(format!(
                    "dataset {k} has {} columns but observes {} variables",
                    m.ncols(),
                    pattern.subset(k).len()
                )));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(LinfaError::InvalidData(format!(
                    "dataset {k} contains non-finite values"
                )));
            }
        }
        Ok(Self { pattern, matrices })
    }

    pub fn pattern(&self) -> &ObservationPattern {
        &self.pattern
    }

    pub fn matrices(&self) -> &[DMatrix<T>] {
        &self.matrices
    }

    pub fn matrix(&self, k: usize) -> &DMatrix<T> {
        &self.matrices[k]
    }

    pub fn d(&self) -> usize {
        self.pattern.d()
    }

    pub fn k(&self) -> usize {
        self.pattern.k()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.matrices.iter().map(|m| m.nrows()).collect()
    }

    pub fn total_rows(&self) -> usize {
        self.matrices.iter().map(|m| m.nrows()).sum()
    }

    /// Keeps the listed rows of each dataset (`rows[k]` indexes matrix `k`).
    pub fn select_rows(&self, rows: &[Vec<usize>]) -> Result<Self> {
        if rows.len() != self.k() {
            return Err(LinfaError::Shape(format!(
                "{} row lists for {} datasets",
                rows.len(),
                self.k()
            )));
        }
        let matrices = self
            .matrices
            .iter()
            .zip(rows)
            .map(|(m, r)| m.select_rows(r.iter()))
            .collect();
        Self::new(self.pattern.clone(), matrices)
    }

    /// Pooled mean of the observed values of every variable.
    pub fn pooled_means(&self) -> DVector<T> {
        let d = self.d();
        let mut sum = DVector::<T>::zeros(d);
        let mut count = vec![0usize; d];
        for (m, subset) in self.matrices.iter().zip(self.pattern.subsets()) {
            for (c, &var) in subset.iter().enumerate() {
                sum[var] += m.column(c).sum();
                count[var] += m.nrows();
            }
        }
        DVector::from_iterator(d, (0..d).map(|i| sum[i] / T::of_usize(count[i].max(1))))
    }

    pub fn cast<U: Real>(&self) -> DatasetCollection<U> {
        DatasetCollection {
            pattern: self.pattern.clone(),
            matrices: self
                .matrices
                .iter()
                .map(|m| m.map(|v| U::of(v.as_f64())))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pattern_rejects_singleton_subsets() {
        let err = ObservationPattern::new(3, vec![vec![0, 1], vec![2]]).unwrap_err();
        assert!(matches!(err, LinfaError::InvalidPattern(_)));
    }

    #[test]
    fn pattern_requires_full_cover() {
        assert!(ObservationPattern::new(4, vec![vec![0, 1], vec![1, 2]]).is_err());
        assert!(ObservationPattern::new(3, vec![vec![0, 1], vec![1, 2]]).is_ok());
    }

    #[test]
    fn pattern_rejects_unsorted_and_out_of_range() {
        assert!(ObservationPattern::new(3, vec![vec![1, 0, 2]]).is_err());
        assert!(ObservationPattern::new(3, vec![vec![0, 1, 1, 2]]).is_err());
        assert!(matches!(
            ObservationPattern::new(3, vec![vec![0, 1, 2, 3]]),
            Err(LinfaError::IndexOutOfRange { index: 3, d: 3 })
        ));
    }

    #[test]
    fn params_reject_non_positive_psi() {
        let l = DMatrix::<f64>::zeros(2, 1);
        assert!(matches!(
            FactorParams::new(l.clone(), DVector::from_vec(vec![1.0, 0.0])),
            Err(LinfaError::NonPositiveDiagonal(1))
        ));
        assert!(FactorParams::new(l, DVector::from_vec(vec![1.0])).is_err());
    }

    #[test]
    fn restrict_identity_and_single_row() {
        let l = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let p = FactorParams::new(l, DVector::from_vec(vec![0.1, 0.2, 0.3])).unwrap();
        assert_eq!(p.restrict(&[0, 1, 2]).unwrap(), p);
        let r = p.restrict(&[1]).unwrap();
        assert_eq!(r.lambda().as_slice(), &[3.0, 4.0]);
        assert_eq!(r.psi()[0], 0.2);
        assert!(matches!(
            p.restrict(&[0, 3]),
            Err(LinfaError::IndexOutOfRange { index: 3, d: 3 })
        ));
    }

    #[test]
    fn restrictions_of_linked_example_share_rows() {
        // d=100, V1={1..80}, V2={21..100} in 1-based terms.
        let d = 100;
        let l = DMatrix::from_fn(d, 2, |i, j| (i * 2 + j) as f64);
        let p = FactorParams::new(l, DVector::from_element(d, 1.0)).unwrap();
        let v1: Vec<usize> = (0..80).collect();
        let v2: Vec<usize> = (20..100).collect();
        let r1 = p.restrict(&v1).unwrap();
        let r2 = p.restrict(&v2).unwrap();
        for var in 20..80 {
            assert_eq!(r1.lambda().row(var), r2.lambda().row(var - 20));
            assert_eq!(r1.lambda().row(var), p.lambda().row(var));
        }
    }

    #[test]
    fn eta_of_linked_example() {
        let pattern =
            ObservationPattern::new(100, vec![(0..80).collect(), (20..100).collect()]).unwrap();
        let pairs = pattern.pair_set();
        assert_eq!(pairs.unobserved_count(), 800);
        assert_eq!(pairs.eta(), 0.08);
        assert!(pairs.contains(5, 5));
        assert!(!pairs.contains(5, 90));
        assert!(!pairs.contains(90, 5));
    }

    #[test]
    fn collection_validates_shapes() {
        let pattern = ObservationPattern::new(3, vec![vec![0, 1], vec![1, 2]]).unwrap();
        let ok = vec![DMatrix::<f64>::zeros(4, 2), DMatrix::zeros(1, 2)];
        assert!(DatasetCollection::new(pattern.clone(), ok).is_ok());
        let bad_cols = vec![DMatrix::<f64>::zeros(4, 3), DMatrix::zeros(1, 2)];
        assert!(DatasetCollection::new(pattern.clone(), bad_cols).is_err());
        let empty = vec![DMatrix::<f64>::zeros(0, 2), DMatrix::zeros(1, 2)];
        assert!(DatasetCollection::new(pattern.clone(), empty).is_err());
        let mut nan = DMatrix::<f64>::zeros(2, 2);
        nan[(0, 0)] = f64::NAN;
        assert!(DatasetCollection::new(pattern, vec![nan, DMatrix::zeros(1, 2)]).is_err());
    }

    #[test]
    fn pooled_means_pool_across_datasets() {
        let pattern = ObservationPattern::new(3, vec![vec![0, 1], vec![1, 2]]).unwrap();
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = DMatrix::from_row_slice(1, 2, &[9.0, 5.0]);
        let data = DatasetCollection::new(pattern, vec![a, b]).unwrap();
        let m = data.pooled_means();
        assert_eq!(m.as_slice(), &[2.0, 5.0, 5.0]);
    }
}
