use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::em::{fit, simple_fill, FitConfig, FitResult};
use crate::error::{LinfaError, Result};
use crate::model::{DatasetCollection, FactorParams, ObservationPattern};

/// Largest allowed gap between the requested and the realized `eta`.
pub const ETA_TOLERANCE: f64 = 0.02;

/// Generated factors and complete data, rows stacked in dataset order.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub params: FactorParams<f64>,
    pub z: DMatrix<f64>,
    pub x_full: DMatrix<f64>,
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Loadings are a seeded permutation of `d q` evenly spaced values on `[-2, 2]`
/// filled row by row; `Psi` runs evenly from `1/d` to `5`.
pub fn generate_ground_truth(d: usize, q: usize, seed: u64) -> Result<FactorParams<f64>> {
    if d == 0 || q == 0 {
        return Err(LinfaError::InvalidParams(format!("need d, q >= 1, got d={d}, q={q}")));
    }
    let mut values = linspace(-2.0, 2.0, d * q);
    values.shuffle(&mut stream_rng(seed, 0));
    let lambda = DMatrix::from_row_slice(d, q, &values);
    let psi = DVector::from_vec(linspace(1.0 / d as f64, 5.0, d));
    FactorParams::new(lambda, psi)
}

/// Serial blocks `[k s, k s + L)` with `L = d - (K - 1) s`.
fn serial_blocks(d: usize, k: usize, stride: usize) -> Vec<Vec<usize>> {
    let len = d - (k - 1) * stride;
    (0..k).map(|b| (b * stride..b * stride + len).collect()).collect()
}

/// `K` contiguous blocks of equal length and constant stride whose realized
/// `eta` is closest to `eta_target`; ties go to the smaller stride.
pub fn build_pattern(d: usize, k: usize, eta_target: f64) -> Result<ObservationPattern> {
    if k == 0 || d < 2 {
        return Err(LinfaError::InvalidConfig(format!("need K >= 1 and d >= 2, got K={k}, d={d}")));
    }
    let mut best: Option<(f64, ObservationPattern)> = None;
    if k == 1 {
        best = Some((0.0, ObservationPattern::complete(d)?));
    } else {
        for stride in 0..d {
            let Some(len) = d.checked_sub((k - 1) * stride) else {
                break;
            };
            if len < stride || len < 2 {
                continue;
            }
            let pattern = ObservationPattern::new(d, serial_blocks(d, k, stride))?;
            let eta = pattern.pair_set().eta();
            if best.as_ref().is_none_or(|(b, _)| (eta - eta_target).abs() < (b - eta_target).abs()) {
                best = Some((eta, pattern));
            }
        }
    }
    match best {
        Some((eta, pattern)) if (eta - eta_target).abs() <= ETA_TOLERANCE + 1e-12 => Ok(pattern),
        other => Err(LinfaError::InfeasibleEta {
            target: eta_target,
            d,
            k,
            closest: other.map_or(f64::NAN, |(e, _)| e),
        }),
    }
}

/// Draws `n_k` fresh samples of `Z` and `X = Z Lambda^T + E` for every dataset
/// and keeps the columns of `V_k`.
pub fn simulate_data(
    truth: &FactorParams<f64>,
    pattern: &ObservationPattern,
    sizes: &[usize],
    seed: u64,
) -> Result<(DatasetCollection<f64>, GroundTruth)> {
    if sizes.len() != pattern.k() || truth.d() != pattern.d() {
        return Err(LinfaError::Shape(format!(
            "{} sizes and {} variables for a pattern with {} datasets and {} variables",
            sizes.len(),
            truth.d(),
            pattern.k(),
            pattern.d()
        )));
    }
    let (d, q) = (truth.d(), truth.q());
    let n: usize = sizes.iter().sum();
    let sd = truth.psi().map(f64::sqrt);
    let mut rng = stream_rng(seed, 1);
    let z = DMatrix::from_fn(n, q, |_, _| rng.sample::<f64, _>(StandardNormal));
    let e = DMatrix::from_fn(n, d, |_, j| rng.sample::<f64, _>(StandardNormal) * sd[j]);
    let x_full = &z * truth.lambda().transpose() + e;
    let mut matrices = Vec::with_capacity(sizes.len());
    let mut offset = 0;
    for (subset, &nk) in pattern.subsets().iter().zip(sizes) {
        matrices.push(x_full.rows(offset, nk).select_columns(subset.iter()));
        offset += nk;
    }
    let data = DatasetCollection::new(pattern.clone(), matrices)?;
    Ok((
        data,
        GroundTruth {
            params: truth.clone(),
            z,
            x_full,
        },
    ))
}

/// Mean-fills the stacked data and fits an ordinary factor model to it.
/// Returns the fit together with the filled matrix.
pub fn sffa_baseline(
    data: &DatasetCollection<f64>,
    config: &FitConfig<f64>,
) -> Result<(FitResult<f64>, DMatrix<f64>)> {
    let filled = simple_fill(data);
    let complete = DatasetCollection::new(ObservationPattern::complete(data.d())?, vec![filled.clone()])?;
    Ok((fit(&complete, config)?, filled))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::assemble_covariance;
    use crate::linalg::symmetric_eigen_desc;

    #[test]
    fn two_by_one_truth() {
        let p = generate_ground_truth(2, 1, 3).unwrap();
        let mut l: Vec<f64> = p.lambda().iter().copied().collect();
        l.sort_by(f64::total_cmp);
        assert_eq!(l, vec![-2.0, 2.0]);
        assert_eq!(p.psi().as_slice(), &[0.5, 5.0]);
        assert_eq!(p, generate_ground_truth(2, 1, 3).unwrap());
    }

    #[test]
    fn truth_is_grid_permutation_and_pd() {
        let p = generate_ground_truth(30, 3, 7).unwrap();
        let mut l: Vec<f64> = p.lambda().iter().copied().collect();
        l.sort_by(f64::total_cmp);
        let grid = linspace(-2.0, 2.0, 90);
        assert!(l.iter().zip(&grid).all(|(a, b)| (a - b).abs() < 1e-15));
        let (vals, _) = symmetric_eigen_desc(&assemble_covariance(&p));
        assert!(vals.min() >= 1.0 / 30.0 - 1e-10);
        assert!((p.psi()[29] - 5.0).abs() < 1e-15);
    }

    #[test]
    fn pattern_eta_checks() {
        let full = build_pattern(40, 1, 0.0).unwrap();
        assert_eq!(full.pair_set().eta(), 0.0);
        assert!(build_pattern(40, 1, 0.3).is_err());

        let p = build_pattern(50, 3, 0.3).unwrap();
        assert_eq!(p.subsets()[1][0], 11);
        assert!((p.pair_set().eta() - 0.2904).abs() < 1e-12);
        let p = build_pattern(50, 3, 0.2).unwrap();
        assert_eq!(p.subsets()[1][0], 9);
        assert!((p.pair_set().eta() - 0.1944).abs() < 1e-12);

        // The largest stride keeps blocks touching, so eta is bounded.
        assert!(matches!(build_pattern(50, 3, 0.95), Err(LinfaError::InfeasibleEta { .. })));
    }

    #[test]
    fn realized_eta_matches_brute_force() {
        for (d, k, eta) in [(50, 3, 0.3), (100, 4, 0.5), (60, 2, 0.2), (100, 4, 0.3)] {
            let p = build_pattern(d, k, eta).unwrap();
            let mut missing = 0usize;
            for i in 0..d {
                for j in 0..d {
                    if !p.subsets().iter().any(|s| s.contains(&i) && s.contains(&j)) {
                        missing += 1;
                    }
                }
            }
            assert_eq!(p.pair_set().eta(), missing as f64 / (d * d) as f64);
            assert!((p.pair_set().eta() - eta).abs() <= ETA_TOLERANCE + 1e-12);
        }
    }

    #[test]
    fn simulated_covariance_matches_model() {
        let truth = generate_ground_truth(10, 2, 1).unwrap();
        let pattern = ObservationPattern::complete(10).unwrap();
        let (data, gt) = simulate_data(&truth, &pattern, &[100_000], 2).unwrap();
        let x = data.matrix(0);
        let emp = x.transpose() * x / x.nrows() as f64;
        let sigma = assemble_covariance(&truth);
        // Sampling error grows with the variances, so compare on their scale.
        let scaled = DMatrix::from_fn(10, 10, |i, j| {
            (emp[(i, j)] - sigma[(i, j)]) / (sigma[(i, i)] * sigma[(j, j)]).sqrt()
        });
        assert!(scaled.abs().max() < 0.05);
        assert_eq!(&gt.x_full, x);
    }

    #[test]
    fn large_noise_dominates_covariance() {
        let lambda = DMatrix::from_element(4, 1, 0.5);
        let psi = DVector::from_element(4, 100.0);
        let truth = FactorParams::new(lambda, psi).unwrap();
        let (data, _) = simulate_data(&truth, &ObservationPattern::complete(4).unwrap(), &[100_000], 0).unwrap();
        let x = data.matrix(0);
        let emp = x.transpose() * x / x.nrows() as f64;
        for i in 0..4 {
            assert!((emp[(i, i)] / 100.25 - 1.0).abs() < 0.05);
            for j in 0..i {
                assert!(emp[(i, j)].abs() < 0.05 * 100.0);
            }
        }
    }

    #[test]
    fn simulation_layout_and_determinism() {
        let truth = generate_ground_truth(12, 2, 4).unwrap();
        let pattern = build_pattern(12, 2, 0.22).unwrap();
        let (data, gt) = simulate_data(&truth, &pattern, &[7, 5], 9).unwrap();
        assert_eq!(gt.z.shape(), (12, 2));
        let v2 = pattern.subset(1);
        for r in 0..5 {
            for (c, &v) in v2.iter().enumerate() {
                assert_eq!(data.matrix(1)[(r, c)], gt.x_full[(7 + r, v)]);
            }
        }
        assert_eq!(simulate_data(&truth, &pattern, &[7, 5], 9).unwrap().1, gt);
    }

    #[test]
    fn sffa_on_complete_data_equals_fit() {
        let truth = generate_ground_truth(8, 2, 2).unwrap();
        let (data, _) = simulate_data(&truth, &ObservationPattern::complete(8).unwrap(), &[200], 3).unwrap();
        let config = FitConfig::new(2);
        let (base, filled) = sffa_baseline(&data, &config).unwrap();
        assert_eq!(&filled, data.matrix(0));
        assert_eq!(base.params, fit(&data, &config).unwrap().params);
    }

    #[test]
    fn sffa_fills_with_observed_mean() {
        let pattern = ObservationPattern::new(3, vec![vec![0, 1], vec![1, 2]]).unwrap();
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = DMatrix::from_row_slice(2, 2, &[5.0, 6.0, 7.0, 9.0]);
        let data = DatasetCollection::new(pattern, vec![a, b]).unwrap();
        let filled = simple_fill(&data);
        assert_eq!(filled[(2, 0)], 2.0);
        assert_eq!(filled[(0, 2)], 7.5);
    }
}
