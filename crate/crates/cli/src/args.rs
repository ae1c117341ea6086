use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use linfa_core::em::{DEFAULT_MAX_ITER, DEFAULT_PSI_FLOOR, DEFAULT_TOL};

#[derive(Debug, Parser)]
#[command(name = "linfa", version, about = "Linked factor analysis for structurally incomplete data")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Log progress to stderr.
    #[arg(long, short, global = true)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the factor model by EM.
    Fit(FitArgs),
    /// Choose the number of factors by AIC or cross-validation.
    Select(SelectArgs),
    /// Bootstrap standard error of a scalar statistic.
    Bootstrap(BootstrapArgs),
    /// Fill in missing entries from a fitted model.
    Complete(CompleteArgs),
    /// Export a partial-correlation or factor graph.
    Graph(GraphArgs),
    /// Run the simulation study.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EmArgs {
    /// Relative log-likelihood change for convergence.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    /// Lower bound on the noise variances.
    #[arg(long, default_value_t = DEFAULT_PSI_FLOOR)]
    pub psi_floor: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    /// Pattern manifest (.json) or a single CSV with missing cells.
    #[arg(long)]
    pub input: PathBuf,
    /// Number of factors.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub q: u64,
    #[command(flatten)]
    pub em: EmArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Directory of a previous fit to start from.
    #[arg(long)]
    pub start: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CriterionArg {
    Aic,
    Cv,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SelectArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub criterion: CriterionArg,
    #[arg(long, default_value_t = linfa_core::selection::DEFAULT_FOLDS)]
    pub folds: usize,
    /// Factor counts to try: `a:b` (inclusive) or a comma list.
    #[arg(long, default_value = "1:10")]
    pub q_grid: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub em: EmArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BootstrapMethod {
    Parametric,
    Nonparametric,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BootstrapArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Number of factors (ignored with --params-dir).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub q: Option<u64>,
    /// Use the fit in this directory as the estimate instead of refitting.
    #[arg(long)]
    pub params_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub method: BootstrapMethod,
    /// Replicates.
    #[arg(long = "B", alias = "replicates", default_value_t = linfa_core::bootstrap::DEFAULT_REPLICATES)]
    pub b: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Statistic and 1-based indices: `correlation i j`, `fisher-correlation i j`,
    /// `partial-correlation i j`, `psi i` or `sigma i j`.
    #[arg(long, num_args = 2..=3, value_names = ["NAME", "INDEX"], allow_hyphen_values = false)]
    pub stat: Vec<String>,
    #[command(flatten)]
    pub em: EmArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CompleteArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory of `linfa fit`.
    #[arg(long)]
    pub params_dir: PathBuf,
    /// Completed CSV; the mask goes next to it as `<stem>_mask.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKindArg {
    Partial,
    Factor,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GraphArgs {
    #[arg(long)]
    pub params_dir: PathBuf,
    #[arg(long, value_enum)]
    pub kind: GraphKindArg,
    /// Number of strongest edges to keep.
    #[arg(long, default_value_t = 400)]
    pub top: usize,
    /// `d x 2` CSV of variable coordinates (factor graphs only).
    #[arg(long)]
    pub coords: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub d: usize,
    /// True number of factors.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub q: u64,
    /// Number of datasets.
    #[arg(long = "K")]
    pub k: usize,
    /// Total sample size over all datasets.
    #[arg(long)]
    pub n: usize,
    /// Target pairwise missingness.
    #[arg(long)]
    pub eta: f64,
    /// Replicate seeds: `a:b` (inclusive) or a comma list.
    #[arg(long, default_value = "0:19")]
    pub seeds: String,
    /// Comma list of `linfa`, `sffa`.
    #[arg(long, default_value = "linfa,sffa")]
    pub methods: String,
    /// Factor counts to fit; defaults to the true `q`.
    #[arg(long)]
    pub q_grid: Option<String>,
    #[command(flatten)]
    pub em: EmArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Also write each replicate's data in manifest form under this directory.
    #[arg(long)]
    pub emit_data: Option<PathBuf>,
}

/// Parses `a:b` (inclusive) or `x,y,z`.
pub fn parse_list(s: &str) -> Result<Vec<u64>, String> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once(':') {
        let a: u64 = a.trim().parse().map_err(|_| format!("bad range start in {s:?}"))?;
        let b: u64 = b.trim().parse().map_err(|_| format!("bad range end in {s:?}"))?;
        if a > b {
            return Err(format!("empty range {s:?}"));
        }
        Ok((a..=b).collect())
    } else {
        let v = s
            .split(',')
            .map(|t| t.trim().parse::<u64>().map_err(|_| format!("bad value {t:?} in {s:?}")))
            .collect::<Result<Vec<_>, _>>()?;
        if v.is_empty() {
            return Err("empty list".into());
        }
        Ok(v)
    }
}
