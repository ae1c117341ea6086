//! Maximum likelihood estimation by expectation-maximization.
//!
//! The E-step is closed form per dataset. The M-step is closed form per block
//! of the vertex tessellation, so each iteration costs one pass over the data.
//! Loadings are rotated to the canonical orientation once, after convergence.

mod estep;
mod mstep;
mod qfunc;
mod rotation;
mod start;

pub use estep::{dataset_stats, e_step, DatasetStats, EStepStats};
pub use mstep::{m_step, m_step_per_vertex, BlockPlan};
pub use qfunc::q_function;
pub use rotation::rotate_canonical;
pub use start::{simple_fill, start_values};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::covariance::log_likelihood;
use crate::error::{LinfaError, Result};
use crate::gvt::{tessellate, VertexPartition};
use crate::model::{DatasetCollection, FactorParams};
use crate::scalar::Real;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 1000;
pub const DEFAULT_PSI_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum Start<T: Real> {
    /// Leading eigenpairs of the mean-filled sample covariance.
    Spectral,
    /// Spectral start with loadings perturbed by seeded Gaussian noise.
    Randomized,
    Provided(FactorParams<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig<T: Real> {
    pub q: usize,
    pub max_iter: usize,
    /// Relative log-likelihood change below which iteration stops.
    pub tol: T,
    pub psi_floor: T,
    /// Only consulted by [`Start::Randomized`].
    pub seed: u64,
    pub start: Start<T>,
}

impl<T: Real> FitConfig<T> {
    pub fn new(q: usize) -> Self {
        Self {
            q,
            max_iter: DEFAULT_MAX_ITER,
            tol: T::of(DEFAULT_TOL),
            psi_floor: T::of(DEFAULT_PSI_FLOOR),
            seed: 0,
            start: Start::Spectral,
        }
    }

    pub fn with_q(&self, q: usize) -> Self {
        Self {
            q,
            ..self.clone()
        }
    }

    pub fn with_start(&self, start: Start<T>) -> Self {
        Self {
            start,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.q == 0 {
            return Err(LinfaError::InvalidConfig("q must be at least 1".into()));
        }
        if self.max_iter == 0 {
            return Err(LinfaError::InvalidConfig("max_iter must be at least 1".into()));
        }
        if !(self.tol > T::zero()) {
            return Err(LinfaError::InvalidConfig("tol must be positive".into()));
        }
        if !(self.psi_floor > T::zero()) {
            return Err(LinfaError::InvalidConfig("psi_floor must be positive".into()));
        }
        if let Start::Provided(p) = &self.start {
            if p.q() != self.q {
                return Err(LinfaError::InvalidConfig(format!(
                    "start values have {} factors, configuration asks for {}",
                    p.q(),
                    self.q
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FitResult<T: Real> {
    /// Canonically rotated estimate.
    pub params: FactorParams<T>,
    /// Observed-data log-likelihood at the start values followed by one entry
    /// per EM iteration.
    pub loglik_trace: Vec<T>,
    pub converged: bool,
    pub iterations: usize,
    pub partition: VertexPartition,
}

impl<T: Real> FitResult<T> {
    pub fn loglik(&self) -> T {
        *self.loglik_trace.last().expect("trace holds the start value")
    }
}

fn initial_params<T: Real>(data: &DatasetCollection<T>, config: &FitConfig<T>) -> Result<FactorParams<T>> {
    match &config.start {
        Start::Spectral => start_values(data, config.q),
        Start::Randomized => {
            let base = start_values(data, config.q)?;
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let (lambda, psi) = base.into_parts();
            let jitter = DMatrix::from_fn(lambda.nrows(), lambda.ncols(), |i, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                T::of(0.5 * z) * psi[i].sqrt()
            });
            FactorParams::new(lambda + jitter, psi)
        }
        Start::Provided(p) => {
            if p.d() != data.d() {
                return Err(LinfaError::Shape(format!(
                    "start values have d={}, data has d={}",
                    p.d(),
                    data.d()
                )));
            }
            let psi = p.psi().map(|v| v.max(config.psi_floor));
            FactorParams::new(p.lambda().clone(), psi)
        }
    }
}

/// Fits the linked factor model to `data`.
///
/// Stops when `|l_t - l_{t-1}| / (|l_{t-1}| + 1) < tol` or after `max_iter`
/// iterations; hitting the iteration cap is reported through
/// [`FitResult::converged`], not as an error.
pub fn fit<T: Real>(data: &DatasetCollection<T>, config: &FitConfig<T>) -> Result<FitResult<T>> {
    config.validate()?;
    if config.q >= data.d() {
        return Err(LinfaError::InvalidConfig(format!(
            "q={} must be smaller than d={}",
            config.q,
            data.d()
        )));
    }
    let plan = BlockPlan::new(data, tessellate(data.pattern()));
    plan.check_identifiable(config.q)?;

    let mut params = initial_params(data, config)?;
    let mut prev = log_likelihood(&params, data)?;
    let mut trace = vec![prev];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iter {
        let stats = e_step(&params, data)?;
        params = m_step(&stats, data, &plan, config.psi_floor)?;
        let ll = log_likelihood(&params, data)?;
        trace.push(ll);
        iterations += 1;
        let rel = (ll - prev).abs() / (prev.abs() + T::one());
        prev = ll;
        if rel < config.tol {
            converged = true;
            break;
        }
    }

    Ok(FitResult {
        params: rotate_canonical(&params),
        loglik_trace: trace,
        converged,
        iterations,
        partition: plan.partition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{assemble_covariance, log_likelihood};
    use crate::model::ObservationPattern;
    use crate::testutil::{random_data, random_params};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Classical complete-data factor EM written directly from the textbook
    /// recursions with dense matrices.
    fn classical_em(x: &DMatrix<f64>, start: &FactorParams<f64>, iters: usize) -> FactorParams<f64> {
        let n = x.nrows() as f64;
        let sxx = x.transpose() * x / n;
        let mut l = start.lambda().clone();
        let mut psi = start.psi().clone();
        let q = l.ncols();
        for _ in 0..iters {
            let sigma = &l * l.transpose() + DMatrix::from_diagonal(&psi);
            let beta = l.transpose() * sigma.try_inverse().unwrap();
            let ezz = DMatrix::identity(q, q) - &beta * &l + &beta * &sxx * beta.transpose();
            l = &sxx * beta.transpose() * ezz.try_inverse().unwrap();
            let resid = &sxx - &l * &beta * &sxx;
            psi = resid.diagonal().map(|v| v.max(1e-6));
        }
        FactorParams::new(l, psi).unwrap()
    }

    #[test]
    fn complete_data_matches_classical_em() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let truth = random_params(&mut rng, 8, 2);
        let data = random_data(&mut rng, &truth, &ObservationPattern::complete(8).unwrap(), &[300]);
        let start = start_values(&data, 2).unwrap();
        let mut cfg = FitConfig::new(2);
        cfg.max_iter = 25;
        cfg.tol = 1e-300;
        cfg.start = Start::Provided(start.clone());
        let res = fit(&data, &cfg).unwrap();
        assert_eq!(res.iterations, 25);
        let reference = rotate_canonical(&classical_em(data.matrix(0), &start, 25));
        assert!((res.params.lambda() - reference.lambda()).abs().max() < 1e-6);
        assert!((res.params.psi() - reference.psi()).abs().max() < 1e-6);
    }

    #[test]
    fn trace_is_monotone_and_final_rotated() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let truth = random_params(&mut rng, 10, 2);
        let pattern = ObservationPattern::new(10, vec![(0..7).collect(), (3..10).collect()]).unwrap();
        let data = random_data(&mut rng, &truth, &pattern, &[200, 200]);
        let res = fit(&data, &FitConfig::new(2)).unwrap();
        assert!(res.converged);
        for w in res.loglik_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-8);
        }
        let ll = log_likelihood(&res.params, &data).unwrap();
        assert!((ll - res.loglik()).abs() < 1e-8 * ll.abs());
        assert!(res.params.psi().iter().all(|&p| p >= 1e-6));
        assert_eq!(res.partition.blocks.len(), 3);
    }

    #[test]
    fn disjoint_subsets_run() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let truth = random_params(&mut rng, 6, 1);
        let pattern = ObservationPattern::new(6, vec![vec![0, 1, 2], vec![3, 4, 5]]).unwrap();
        let data = random_data(&mut rng, &truth, &pattern, &[100, 100]);
        let res = fit(&data, &FitConfig::new(1)).unwrap();
        let sigma = assemble_covariance(&res.params);
        let l = res.params.lambda();
        assert!((sigma[(0, 4)] - l[(0, 0)] * l[(4, 0)]).abs() < 1e-12);
    }

    #[test]
    fn warm_start_is_a_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let truth = random_params(&mut rng, 8, 2);
        let pattern = ObservationPattern::new(8, vec![(0..6).collect(), (2..8).collect()]).unwrap();
        let data = random_data(&mut rng, &truth, &pattern, &[150, 150]);
        let first = fit(&data, &FitConfig::new(2)).unwrap();
        assert!(first.converged);
        let again = fit(&data, &FitConfig::new(2).with_start(Start::Provided(first.params))).unwrap();
        assert!(again.converged);
        assert!(again.iterations <= 2);
    }

    #[test]
    fn config_validation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let truth = random_params(&mut rng, 4, 1);
        let data = random_data(&mut rng, &truth, &ObservationPattern::complete(4).unwrap(), &[20]);
        assert!(fit(&data, &FitConfig::new(0)).is_err());
        assert!(fit(&data, &FitConfig::new(4)).is_err());
        let mut cfg = FitConfig::new(1);
        cfg.tol = 0.0;
        assert!(fit(&data, &cfg).is_err());
        let mut cfg = FitConfig::new(1);
        cfg.max_iter = 3;
        cfg.tol = 1e-300;
        let res = fit(&data, &cfg).unwrap();
        assert!(!res.converged);
        assert_eq!(res.iterations, 3);
        assert_eq!(res.loglik_trace.len(), 4);
    }

    #[test]
    fn randomized_start_is_seeded() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let truth = random_params(&mut rng, 5, 1);
        let data = random_data(&mut rng, &truth, &ObservationPattern::complete(5).unwrap(), &[40]);
        let mut cfg = FitConfig::new(1).with_start(Start::Randomized);
        cfg.seed = 9;
        let a = fit(&data, &cfg).unwrap();
        let b = fit(&data, &cfg).unwrap();
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn single_precision_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let truth = random_params(&mut rng, 6, 1);
        let data = random_data(&mut rng, &truth, &ObservationPattern::complete(6).unwrap(), &[200]);
        let data32: DatasetCollection<f32> = data.cast();
        let mut cfg = FitConfig::<f32>::new(1);
        cfg.tol = 1e-6;
        let res32 = fit(&data32, &cfg).unwrap();
        let res64 = fit(&data, &FitConfig::new(1)).unwrap();
        let ll32 = log_likelihood(&res32.params.cast::<f64>(), &data).unwrap();
        let ll64 = res64.loglik();
        assert!(res32.converged);
        assert!((ll32 - ll64).abs() < 1e-4 * ll64.abs(), "{ll32} vs {ll64}");
    }
}
