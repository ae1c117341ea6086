use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::completion::{complete_datasets, predict_dataset_factors, FactorPredictor};
use crate::covariance::{assemble_covariance, correlation_matrix, partial_correlations, precision_woodbury};
use crate::em::{fit, FitConfig, FitResult};
use crate::error::{LinfaError, Result};
use crate::model::{DatasetCollection, ObservationPattern, PairSet};
use crate::selection::{select_q, Criterion};

use super::generate::{build_pattern, generate_ground_truth, sffa_baseline, simulate_data, GroundTruth};
use super::metrics::{completion_accuracy, component_risks, correlation_risk, trace_r2, PairSelection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Linfa,
    Sffa,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Linfa => "linfa",
            Method::Sffa => "sffa",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linfa" => Some(Method::Linfa),
            "sffa" | "sf-fa" => Some(Method::Sffa),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub d: usize,
    pub q_true: usize,
    pub k: usize,
    pub n_total: usize,
    pub eta_target: f64,
    pub seeds: Vec<u64>,
    /// A single value fixes `q`; several are resolved by AIC per method.
    pub q_fit_grid: Vec<usize>,
    pub methods: Vec<Method>,
    pub tol: f64,
    pub max_iter: usize,
    pub psi_floor: f64,
}

impl ExperimentConfig {
    pub fn new(d: usize, q_true: usize, k: usize, n_total: usize, eta_target: f64, seeds: Vec<u64>) -> Self {
        let defaults = FitConfig::<f64>::new(q_true);
        Self {
            d,
            q_true,
            k,
            n_total,
            eta_target,
            seeds,
            q_fit_grid: vec![q_true],
            methods: vec![Method::Linfa, Method::Sffa],
            tol: defaults.tol,
            max_iter: defaults.max_iter,
            psi_floor: defaults.psi_floor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n_total < self.k {
            return Err(LinfaError::InvalidConfig(format!(
                "need 1 <= K <= n, got K={}, n={}",
                self.k, self.n_total
            )));
        }
        if self.seeds.is_empty() || self.methods.is_empty() || self.q_fit_grid.is_empty() {
            return Err(LinfaError::InvalidConfig("seeds, methods and q grid must be nonempty".into()));
        }
        if self.q_true == 0 || self.q_true >= self.d {
            return Err(LinfaError::InvalidConfig(format!(
                "need 1 <= q_true < d, got q_true={}, d={}",
                self.q_true, self.d
            )));
        }
        self.fit_config(self.q_true).validate()
    }

    /// `n_total` split into `K` sizes that differ by at most one.
    pub fn dataset_sizes(&self) -> Vec<usize> {
        let (base, extra) = (self.n_total / self.k, self.n_total % self.k);
        (0..self.k).map(|i| base + usize::from(i < extra)).collect()
    }

    pub fn fit_config(&self, q: usize) -> FitConfig<f64> {
        FitConfig {
            tol: self.tol,
            max_iter: self.max_iter,
            psi_floor: self.psi_floor,
            ..FitConfig::new(q)
        }
    }
}

/// Metrics of one method on one seed. Metrics that are undefined (for
/// example risks over an empty set of unobserved pairs) are `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRecord {
    pub seed: u64,
    pub method: Method,
    pub eta: f64,
    pub q_fit: Option<usize>,
    pub corr_risk_observed: Option<f64>,
    pub corr_risk_unobserved: Option<f64>,
    pub pcorr_risk_observed: Option<f64>,
    pub pcorr_risk_unobserved: Option<f64>,
    pub loadings_risk: Option<f64>,
    pub psi_risk: Option<f64>,
    pub trace_r2: Option<f64>,
    pub completion_corr: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub error: Option<String>,
}

impl ExperimentRecord {
    pub const METRICS: [&'static str; 8] = [
        "corr_risk_observed",
        "corr_risk_unobserved",
        "pcorr_risk_observed",
        "pcorr_risk_unobserved",
        "loadings_risk",
        "psi_risk",
        "trace_r2",
        "completion_corr",
    ];

    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "corr_risk_observed" => self.corr_risk_observed,
            "corr_risk_unobserved" => self.corr_risk_unobserved,
            "pcorr_risk_observed" => self.pcorr_risk_observed,
            "pcorr_risk_unobserved" => self.pcorr_risk_unobserved,
            "loadings_risk" => self.loadings_risk,
            "psi_risk" => self.psi_risk,
            "trace_r2" => self.trace_r2,
            "completion_corr" => self.completion_corr,
            _ => None,
        }
    }

    fn failed(seed: u64, method: Method, eta: f64, err: &LinfaError) -> Self {
        Self {
            seed,
            method,
            eta,
            q_fit: None,
            corr_risk_observed: None,
            corr_risk_unobserved: None,
            pcorr_risk_observed: None,
            pcorr_risk_unobserved: None,
            loadings_risk: None,
            psi_risk: None,
            trace_r2: None,
            completion_corr: None,
            iterations: None,
            converged: None,
            error: Some(err.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub seed: u64,
    pub method: Method,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSummary {
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    pub se: f64,
    /// `mean - 2 se`.
    pub lower: f64,
    /// `mean + 2 se`.
    pub upper: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub pattern: ObservationPattern,
    pub eta: f64,
    /// Ordered by seed (in configuration order), then method.
    pub records: Vec<ExperimentRecord>,
    pub timings: Vec<Timing>,
}

/// Everything generated for one seed.
#[derive(Debug, Clone)]
pub struct Replicate {
    pub data: DatasetCollection<f64>,
    pub truth: GroundTruth,
}

pub fn generate_replicate(config: &ExperimentConfig, pattern: &ObservationPattern, seed: u64) -> Result<Replicate> {
    let params = generate_ground_truth(config.d, config.q_true, seed)?;
    let (data, truth) = simulate_data(&params, pattern, &config.dataset_sizes(), seed)?;
    Ok(Replicate { data, truth })
}

struct Evaluation<'a> {
    truth: &'a GroundTruth,
    pairs: &'a PairSet,
    corr_true: DMatrix<f64>,
    pcorr_true: DMatrix<f64>,
}

impl Evaluation<'_> {
    fn risk(&self, est: &DMatrix<f64>, truth: &DMatrix<f64>, sel: PairSelection) -> Result<Option<f64>> {
        match correlation_risk(est, truth, self.pairs, sel) {
            Ok(v) => Ok(Some(v)),
            Err(LinfaError::EmptySelection(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

fn fit_with_grid<F>(config: &ExperimentConfig, data: &DatasetCollection<f64>, fitter: F) -> Result<FitResult<f64>>
where
    F: Fn(&FitConfig<f64>) -> Result<FitResult<f64>>,
{
    let q = if config.q_fit_grid.len() == 1 {
        config.q_fit_grid[0]
    } else {
        select_q(data, &config.q_fit_grid, Criterion::Aic, &config.fit_config(config.q_true))?.chosen_q
    };
    fitter(&config.fit_config(q))
}

fn evaluate_method(
    config: &ExperimentConfig,
    rep: &Replicate,
    eval: &Evaluation<'_>,
    method: Method,
    seed: u64,
    eta: f64,
) -> Result<ExperimentRecord> {
    let data = &rep.data;
    let (fitted, z_hat, (x_hat, mask)) = match method {
        Method::Linfa => {
            let fitted = fit_with_grid(config, data, |c| fit(data, c))?;
            let z_hat = predict_dataset_factors(&fitted.params, data)?;
            let completed = complete_datasets(&fitted.params, data)?;
            (fitted, z_hat, completed)
        }
        Method::Sffa => {
            let filled = crate::em::simple_fill(data);
            let complete = DatasetCollection::new(ObservationPattern::complete(data.d())?, vec![filled.clone()])?;
            let fitted = fit_with_grid(config, &complete, |c| Ok(sffa_baseline(data, c)?.0))?;
            let all: Vec<usize> = (0..data.d()).collect();
            let z_hat = FactorPredictor::new(&fitted.params, &all)?.predict_rows(&filled)?;
            let mask = missing_mask(data);
            (fitted, z_hat, (filled, mask))
        }
    };
    let est = &fitted.params;
    let corr = correlation_matrix(&assemble_covariance(est))?;
    let pcorr = partial_correlations(&precision_woodbury(est)?)?;
    let (loadings, psi) = component_risks(est, &eval.truth.params)?;
    Ok(ExperimentRecord {
        seed,
        method,
        eta,
        q_fit: Some(est.q()),
        corr_risk_observed: eval.risk(&corr, &eval.corr_true, PairSelection::Observed)?,
        corr_risk_unobserved: eval.risk(&corr, &eval.corr_true, PairSelection::Unobserved)?,
        pcorr_risk_observed: eval.risk(&pcorr, &eval.pcorr_true, PairSelection::Observed)?,
        pcorr_risk_unobserved: eval.risk(&pcorr, &eval.pcorr_true, PairSelection::Unobserved)?,
        loadings_risk: Some(loadings),
        psi_risk: Some(psi),
        trace_r2: trace_r2(&eval.truth.z, &z_hat).ok(),
        completion_corr: completion_accuracy(&eval.truth.x_full, &x_hat, &mask).ok(),
        iterations: Some(fitted.iterations),
        converged: Some(fitted.converged),
        error: None,
    })
}

/// `mask[r][i]` is true when variable `i` is missing for stacked row `r`.
pub fn missing_mask(data: &DatasetCollection<f64>) -> Vec<Vec<bool>> {
    let mut mask = Vec::with_capacity(data.total_rows());
    for (k, x) in data.matrices().iter().enumerate() {
        let mut row = vec![true; data.d()];
        for &v in data.pattern().subset(k) {
            row[v] = false;
        }
        mask.extend(std::iter::repeat_n(row, x.nrows()));
    }
    mask
}

fn run_seed(
    config: &ExperimentConfig,
    pattern: &ObservationPattern,
    pairs: &PairSet,
    eta: f64,
    seed: u64,
) -> Vec<(ExperimentRecord, Timing)> {
    let prepared = generate_replicate(config, pattern, seed).and_then(|rep| {
        let sigma = assemble_covariance(&rep.truth.params);
        let corr_true = correlation_matrix(&sigma)?;
        let pcorr_true = partial_correlations(&precision_woodbury(&rep.truth.params)?)?;
        Ok((rep, corr_true, pcorr_true))
    });
    config
        .methods
        .iter()
        .map(|&method| {
            let start = Instant::now();
            let record = match &prepared {
                Ok((rep, corr_true, pcorr_true)) => {
                    let eval = Evaluation {
                        truth: &rep.truth,
                        pairs,
                        corr_true: corr_true.clone(),
                        pcorr_true: pcorr_true.clone(),
                    };
                    evaluate_method(config, rep, &eval, method, seed, eta)
                        .unwrap_or_else(|e| ExperimentRecord::failed(seed, method, eta, &e))
                }
                Err(e) => ExperimentRecord::failed(seed, method, eta, e),
            };
            let seconds = start.elapsed().as_secs_f64();
            (record, Timing { seed, method, seconds })
        })
        .collect()
}

/// Runs every seed (in parallel) and method. Per-replicate failures are
/// recorded in the output rather than returned.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let pattern = build_pattern(config.d, config.k, config.eta_target)?;
    let pairs = pattern.pair_set();
    let eta = pairs.eta();
    let per_seed: Vec<Vec<(ExperimentRecord, Timing)>> = config
        .seeds
        .par_iter()
        .map(|&seed| run_seed(config, &pattern, &pairs, eta, seed))
        .collect();
    let (records, timings) = per_seed.into_iter().flatten().unzip();
    Ok(ExperimentOutput {
        pattern,
        eta,
        records,
        timings,
    })
}

pub fn summarize_metric(values: &[f64]) -> Option<MetricSummary> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let se = sd / n.sqrt();
    Some(MetricSummary {
        count: values.len(),
        mean,
        sd,
        se,
        lower: mean - 2.0 * se,
        upper: mean + 2.0 * se,
    })
}

/// Per method and metric summaries over the seeds where the metric is defined.
pub fn summarize(records: &[ExperimentRecord]) -> BTreeMap<&'static str, BTreeMap<&'static str, MetricSummary>> {
    let mut out = BTreeMap::new();
    let mut methods: Vec<Method> = records.iter().map(|r| r.method).collect();
    methods.sort();
    methods.dedup();
    for method in methods {
        let mine: Vec<&ExperimentRecord> = records.iter().filter(|r| r.method == method).collect();
        let mut per_metric = BTreeMap::new();
        for name in ExperimentRecord::METRICS {
            let values: Vec<f64> = mine.iter().filter_map(|r| r.metric(name)).collect();
            if let Some(s) = summarize_metric(&values) {
                per_metric.insert(name, s);
            }
        }
        out.insert(method.name(), per_metric);
    }
    out
}

/// Mean of a metric for one method over seeds where it is defined.
pub fn metric_mean(records: &[ExperimentRecord], method: Method, name: &str) -> Option<f64> {
    let values: Vec<f64> = records
        .iter()
        .filter(|r| r.method == method)
        .filter_map(|r| r.metric(name))
        .collect();
    summarize_metric(&values).map(|s| s.mean)
}

/// Fraction of seeds on which `better(a, b)` holds for methods `a` and `b`.
pub fn paired_win_rate<F>(records: &[ExperimentRecord], a: Method, b: Method, name: &str, better: F) -> f64
where
    F: Fn(f64, f64) -> bool,
{
    let mut by_seed: BTreeMap<u64, (Option<f64>, Option<f64>)> = BTreeMap::new();
    for r in records {
        let slot = by_seed.entry(r.seed).or_default();
        if r.method == a {
            slot.0 = r.metric(name);
        } else if r.method == b {
            slot.1 = r.metric(name);
        }
    }
    let total = by_seed.len();
    let wins = by_seed
        .values()
        .filter(|(x, y)| matches!((x, y), (Some(x), Some(y)) if better(*x, *y)))
        .count();
    if total == 0 {
        0.0
    } else {
        wins as f64 / total as f64
    }
}
