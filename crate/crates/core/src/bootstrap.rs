//! Parametric and nonparametric bootstrap standard errors for scalar
//! functionals of the fitted parameters.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::covariance::{partial_correlations, precision_woodbury};
use crate::em::{fit, FitConfig, Start};
use crate::error::{LinfaError, Result};
use crate::model::{DatasetCollection, FactorParams, ObservationPattern};
use crate::scalar::Real;

pub const DEFAULT_REPLICATES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapReport {
    /// Requested replicate count.
    pub b: usize,
    /// Values of the statistic on the successful replicates, in replicate order.
    pub theta_hats: Vec<f64>,
    pub se: f64,
    /// Replicates whose refit failed or did not converge.
    pub failures: usize,
}

/// `atanh(r)`.
pub fn fisher_z<T: Real>(r: T) -> Result<T> {
    if !(r.abs() < T::one()) {
        return Err(LinfaError::InvalidData(format!(
            "Fisher transform needs |r| < 1, got {r}"
        )));
    }
    Ok(r.atanh())
}

/// Named scalar functionals of `(Lambda, Psi)`. Indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Statistic {
    Correlation { i: usize, j: usize },
    FisherCorrelation { i: usize, j: usize },
    PartialCorrelation { i: usize, j: usize },
    Psi { i: usize },
    Sigma { i: usize, j: usize },
}

impl Statistic {
    pub fn validate(&self, d: usize) -> Result<()> {
        let indices: &[usize] = match self {
            Statistic::Psi { i } => &[*i],
            Statistic::Correlation { i, j }
            | Statistic::FisherCorrelation { i, j }
            | Statistic::PartialCorrelation { i, j }
            | Statistic::Sigma { i, j } => &[*i, *j],
        };
        if let Some(&index) = indices.iter().find(|&&v| v >= d) {
            return Err(LinfaError::IndexOutOfRange { index, d });
        }
        if let Statistic::FisherCorrelation { i, j } = self {
            if i == j {
                return Err(LinfaError::InvalidConfig(
                    "Fisher-transformed correlation of a variable with itself is undefined".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn evaluate<T: Real>(&self, params: &FactorParams<T>) -> Result<T> {
        self.validate(params.d())?;
        let sigma = |i: usize, j: usize| {
            let mut s = params.lambda().row(i).dot(&params.lambda().row(j));
            if i == j {
                s += params.psi()[i];
            }
            s
        };
        let corr = |i: usize, j: usize| sigma(i, j) / (sigma(i, i) * sigma(j, j)).sqrt();
        match *self {
            Statistic::Correlation { i, j } if i == j => Ok(T::one()),
            Statistic::Correlation { i, j } => Ok(corr(i, j)),
            Statistic::FisherCorrelation { i, j } => fisher_z(corr(i, j)),
            Statistic::PartialCorrelation { i, j } => {
                Ok(partial_correlations(&precision_woodbury(params)?)?[(i, j)])
            }
            Statistic::Psi { i } => Ok(params.psi()[i]),
            Statistic::Sigma { i, j } => Ok(sigma(i, j)),
        }
    }
}

/// Outcome of one bootstrap refit; `None` when it failed or did not converge.
pub type Replicate<T> = Option<FactorParams<T>>;

fn replicate_rng(seed: u64, b: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(b as u64);
    rng
}

fn check_replicates(b: usize) -> Result<()> {
    if b < 2 {
        return Err(LinfaError::InvalidConfig(format!(
            "bootstrap needs at least 2 replicates, got {b}"
        )));
    }
    Ok(())
}

fn refit<T: Real>(data: &DatasetCollection<T>, config: &FitConfig<T>) -> Replicate<T> {
    match fit(data, config) {
        Ok(r) if r.converged => Some(r.params),
        _ => None,
    }
}

/// Draws `n_k` samples per dataset from `N(0, Lambda_k Lambda_k^T + Psi_k)`.
pub fn sample_from_model<T: Real, R: Rng>(
    params: &FactorParams<T>,
    pattern: &ObservationPattern,
    sizes: &[usize],
    rng: &mut R,
) -> Result<DatasetCollection<T>> {
    if pattern.d() != params.d() || sizes.len() != pattern.k() {
        return Err(LinfaError::Shape(format!(
            "parameters for {} variables, pattern with {} variables and {} datasets, {} sizes",
            params.d(),
            pattern.d(),
            pattern.k(),
            sizes.len()
        )));
    }
    let q = params.q();
    let mut matrices = Vec::with_capacity(pattern.k());
    for (subset, &n) in pattern.subsets().iter().zip(sizes) {
        let r = params.restrict(subset)?;
        let sd = r.psi().map(|v| v.sqrt());
        let z = DMatrix::<T>::from_fn(n, q, |_, _| T::of(rng.sample::<f64, _>(StandardNormal)));
        let e = DMatrix::<T>::from_fn(n, subset.len(), |_, j| {
            T::of(rng.sample::<f64, _>(StandardNormal)) * sd[j]
        });
        matrices.push(z * r.lambda().transpose() + e);
    }
    DatasetCollection::new(pattern.clone(), matrices)
}

/// Rows of each dataset drawn with replacement, independently across datasets.
pub fn resample_rows<T: Real, R: Rng>(data: &DatasetCollection<T>, rng: &mut R) -> Result<DatasetCollection<T>> {
    let rows: Vec<Vec<usize>> = data
        .sizes()
        .into_iter()
        .map(|n| (0..n).map(|_| rng.random_range(0..n)).collect())
        .collect();
    data.select_rows(&rows)
}

/// Refits for `b` datasets simulated from `mle`, warm-started at `mle`.
pub fn parametric_replicates<T: Real>(
    mle: &FactorParams<T>,
    pattern: &ObservationPattern,
    sizes: &[usize],
    b: usize,
    seed: u64,
    config: &FitConfig<T>,
) -> Result<Vec<Replicate<T>>> {
    check_replicates(b)?;
    let config = FitConfig {
        q: mle.q(),
        start: Start::Provided(mle.clone()),
        ..config.clone()
    };
    config.validate()?;
    (0..b)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replicate_rng(seed, rep);
            let data = sample_from_model(mle, pattern, sizes, &mut rng)?;
            Ok(refit(&data, &config))
        })
        .collect()
}

/// Refits for `b` row-resampled copies of `data`, each started from the
/// spectral start values of its own resample.
pub fn nonparametric_replicates<T: Real>(
    data: &DatasetCollection<T>,
    b: usize,
    seed: u64,
    config: &FitConfig<T>,
) -> Result<Vec<Replicate<T>>> {
    check_replicates(b)?;
    let config = config.with_start(Start::Spectral);
    config.validate()?;
    (0..b)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replicate_rng(seed, rep);
            let resampled = resample_rows(data, &mut rng)?;
            Ok(refit(&resampled, &config))
        })
        .collect()
}

/// Evaluates `g` on every successful replicate and forms the standard error
/// `sqrt(sum (theta_b - mean)^2 / (B_ok - 1))`.
pub fn summarize<T, G>(replicates: &[Replicate<T>], g: G) -> Result<BootstrapReport>
where
    T: Real,
    G: Fn(&FactorParams<T>) -> Result<T>,
{
    let mut theta_hats = Vec::with_capacity(replicates.len());
    for p in replicates.iter().flatten() {
        theta_hats.push(g(p)?.as_f64());
    }
    if theta_hats.is_empty() {
        return Err(LinfaError::AllReplicatesFailed);
    }
    let n = theta_hats.len() as f64;
    let mean = theta_hats.iter().sum::<f64>() / n;
    let ss: f64 = theta_hats.iter().map(|t| (t - mean) * (t - mean)).sum();
    let se = (ss / (n - 1.0).max(1.0)).sqrt();
    Ok(BootstrapReport {
        b: replicates.len(),
        failures: replicates.len() - theta_hats.len(),
        theta_hats,
        se,
    })
}

pub fn parametric_bootstrap<T, G>(
    mle: &FactorParams<T>,
    pattern: &ObservationPattern,
    sizes: &[usize],
    g: G,
    b: usize,
    seed: u64,
    config: &FitConfig<T>,
) -> Result<BootstrapReport>
where
    T: Real,
    G: Fn(&FactorParams<T>) -> Result<T>,
{
    summarize(&parametric_replicates(mle, pattern, sizes, b, seed, config)?, g)
}

pub fn nonparametric_bootstrap<T, G>(
    data: &DatasetCollection<T>,
    g: G,
    b: usize,
    seed: u64,
    config: &FitConfig<T>,
) -> Result<BootstrapReport>
where
    T: Real,
    G: Fn(&FactorParams<T>) -> Result<T>,
{
    summarize(&nonparametric_replicates(data, b, seed, config)?, g)
}
