//! Choosing the number of factors by AIC or N-fold cross-validation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::covariance::log_likelihood;
use crate::em::{fit, FitConfig, FitResult, Start};
use crate::error::{LinfaError, Result};
use crate::model::DatasetCollection;
use crate::scalar::Real;

pub const DEFAULT_FOLDS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Criterion {
    Aic,
    Cv { folds: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionReport {
    pub criterion: Criterion,
    pub grid: Vec<usize>,
    pub risks: Vec<f64>,
    pub chosen_q: usize,
    /// Full-data log-likelihood per grid point (AIC only).
    pub logliks: Vec<f64>,
    /// Held-out negative log-likelihood per grid point and fold (CV only).
    pub per_fold: Vec<Vec<f64>>,
}

/// `-2 loglik + 2 d (q + 1)`.
pub fn aic_from_loglik<T: Real>(loglik: T, d: usize, q: usize) -> T {
    -T::of(2.0) * loglik + T::of_usize(2 * d * (q + 1))
}

/// AIC risk of a fitted model, recomputing the log-likelihood on `data`.
pub fn aic_risk<T: Real>(result: &FitResult<T>, data: &DatasetCollection<T>) -> Result<T> {
    let ll = log_likelihood(&result.params, data)?;
    Ok(aic_from_loglik(ll, data.d(), result.params.q()))
}

/// Splits the rows of every dataset into `folds` groups of near-equal size.
///
/// Returns `assignment[fold][dataset]`, the rows of that dataset held out in
/// that fold. Each dataset is shuffled with its own seeded stream; group sizes
/// differ by at most one.
pub fn cv_folds(sizes: &[usize], folds: usize, seed: u64) -> Result<Vec<Vec<Vec<usize>>>> {
    if folds < 2 {
        return Err(LinfaError::InvalidConfig("cross-validation needs at least 2 folds".into()));
    }
    let mut out = vec![Vec::with_capacity(sizes.len()); folds];
    for (k, &n) in sizes.iter().enumerate() {
        if n < folds {
            return Err(LinfaError::EmptyFold {
                fold: n + 1,
                dataset: k + 1,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let mut rows: Vec<usize> = (0..n).collect();
        rows.shuffle(&mut rng);
        let (base, extra) = (n / folds, n % folds);
        let mut start = 0;
        for (f, slot) in out.iter_mut().enumerate() {
            let len = base + usize::from(f < extra);
            let mut chunk = rows[start..start + len].to_vec();
            chunk.sort_unstable();
            slot.push(chunk);
            start += len;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome<T> {
    pub risk: T,
    /// Held-out negative log-likelihood of each fold.
    pub per_fold: Vec<T>,
}

fn config_for_q<T: Real>(config: &FitConfig<T>, q: usize) -> FitConfig<T> {
    let start = match &config.start {
        Start::Provided(p) if p.q() != q => Start::Spectral,
        other => other.clone(),
    };
    FitConfig {
        q,
        start,
        ..config.clone()
    }
}

/// `-(1/N) sum_j loglik(theta_{-j}; fold_j)`.
pub fn cv_risk<T: Real>(
    data: &DatasetCollection<T>,
    q: usize,
    folds: usize,
    config: &FitConfig<T>,
    seed: u64,
) -> Result<CvOutcome<T>> {
    let assignment = cv_folds(&data.sizes(), folds, seed)?;
    let config = config_for_q(config, q);
    let mut per_fold = Vec::with_capacity(folds);
    for held in &assignment {
        let train_rows: Vec<Vec<usize>> = held
            .iter()
            .zip(data.sizes())
            .map(|(out, n)| (0..n).filter(|r| out.binary_search(r).is_err()).collect())
            .collect();
        let train = data.select_rows(&train_rows)?;
        let test = data.select_rows(held)?;
        let fitted = fit(&train, &config)?;
        per_fold.push(-log_likelihood(&fitted.params, &test)?);
    }
    let risk = per_fold.iter().fold(T::zero(), |a, &b| a + b) / T::of_usize(folds);
    Ok(CvOutcome { risk, per_fold })
}

/// Evaluates `criterion` at every grid point and returns the minimizer;
/// equal risks resolve to the smaller `q`. Grid points run in parallel.
pub fn select_q<T: Real>(
    data: &DatasetCollection<T>,
    grid: &[usize],
    criterion: Criterion,
    config: &FitConfig<T>,
) -> Result<SelectionReport> {
    if grid.is_empty() {
        return Err(LinfaError::InvalidConfig("empty grid of factor counts".into()));
    }
    struct Point {
        risk: f64,
        loglik: Option<f64>,
        per_fold: Option<Vec<f64>>,
    }
    let points = grid
        .par_iter()
        .map(|&q| -> Result<Point> {
            match criterion {
                Criterion::Aic => {
                    let fitted = fit(data, &config_for_q(config, q))?;
                    let ll = log_likelihood(&fitted.params, data)?;
                    Ok(Point {
                        risk: aic_from_loglik(ll, data.d(), q).as_f64(),
                        loglik: Some(ll.as_f64()),
                        per_fold: None,
                    })
                }
                Criterion::Cv { folds, seed } => {
                    let out = cv_risk(data, q, folds, config, seed)?;
                    Ok(Point {
                        risk: out.risk.as_f64(),
                        loglik: None,
                        per_fold: Some(out.per_fold.iter().map(|v| v.as_f64()).collect()),
                    })
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let risks: Vec<f64> = points.iter().map(|p| p.risk).collect();
    let chosen_q = argmin_q(grid, &risks);
    Ok(SelectionReport {
        criterion,
        grid: grid.to_vec(),
        risks,
        chosen_q,
        logliks: points.iter().filter_map(|p| p.loglik).collect(),
        per_fold: points.into_iter().filter_map(|p| p.per_fold).collect(),
    })
}

/// Grid value with the smallest risk, preferring smaller `q` on ties. NaN
/// risks never win.
pub fn argmin_q(grid: &[usize], risks: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..grid.len() {
        let (r, b) = (risks[i], risks[best]);
        let better = match (r.is_nan(), b.is_nan()) {
            (true, _) => false,
            (false, true) => true,
            _ => r < b || (r == b && grid[i] < grid[best]),
        };
        if better {
            best = i;
        }
    }
    grid[best]
}
