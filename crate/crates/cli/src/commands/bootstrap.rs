use linfa_core::bootstrap::{nonparametric_replicates, parametric_replicates, summarize, Statistic};
use linfa_core::fit;
use serde::Serialize;
use serde_json::json;

use super::{check_dimension, fit_config, read_params};
use crate::args::{BootstrapArgs, BootstrapMethod};
use crate::csvio::create_dir;
use crate::error::{CliError, CliResult};
use crate::ingest::ingest;
use crate::manifest::{write_json, ManifestBuilder};

pub const REPORT_FILE: &str = "bootstrap_report.json";

/// Parses `NAME i [j]` with 1-based indices into a 0-based [`Statistic`].
pub fn parse_statistic(words: &[String]) -> CliResult<Statistic> {
    let usage = || {
        CliError::Usage(format!(
            "unknown statistic {:?}; expected correlation i j, fisher-correlation i j, partial-correlation i j, psi i or sigma i j",
            words.join(" ")
        ))
    };
    let (name, rest) = words.split_first().ok_or_else(usage)?;
    let idx = rest
        .iter()
        .map(|w| match w.parse::<usize>() {
            Ok(v) if v >= 1 => Ok(v - 1),
            _ => Err(CliError::Usage(format!("statistic index {w:?} is not a positive integer"))),
        })
        .collect::<CliResult<Vec<_>>>()?;
    let stat = match (name.as_str(), idx.as_slice()) {
        ("correlation", &[i, j]) => Statistic::Correlation { i, j },
        ("fisher-correlation", &[i, j]) => Statistic::FisherCorrelation { i, j },
        ("partial-correlation", &[i, j]) => Statistic::PartialCorrelation { i, j },
        ("psi", &[i]) => Statistic::Psi { i },
        ("sigma", &[i, j]) => Statistic::Sigma { i, j },
        _ => return Err(usage()),
    };
    if let Statistic::FisherCorrelation { i, j } = stat {
        if i == j {
            return Err(CliError::Usage(
                "fisher-correlation needs two different variables (a variable's correlation with itself is 1)".into(),
            ));
        }
    }
    Ok(stat)
}

#[derive(Serialize)]
struct Report<'a> {
    method: BootstrapMethod,
    statistic: &'a [String],
    seed: u64,
    estimate: f64,
    #[serde(flatten)]
    report: &'a linfa_core::bootstrap::BootstrapReport,
}

pub fn run(args: &BootstrapArgs) -> CliResult<()> {
    let mut manifest = ManifestBuilder::new("bootstrap", serde_json::to_value(args).unwrap_or_default(), Some(args.seed));
    let stat = parse_statistic(&args.stat)?;
    if args.b < 2 {
        return Err(CliError::Usage("--B must be at least 2".into()));
    }
    let ing = ingest(&args.input)?;
    manifest.ingestion(&ing)?;
    stat.validate(ing.d()).map_err(|e| CliError::Usage(e.to_string()))?;

    let mle = match (&args.params_dir, args.q) {
        (Some(dir), _) => {
            let (_, p) = read_params(dir)?;
            check_dimension("parameters", ing.d(), p.d())?;
            p
        }
        (None, Some(q)) => fit(&ing.data, &fit_config(q as usize, &args.em))?.params,
        (None, None) => return Err(CliError::Usage("give --q or --params-dir".into())),
    };
    let config = fit_config(mle.q(), &args.em);
    let replicates = match args.method {
        BootstrapMethod::Parametric => {
            parametric_replicates(&mle, ing.data.pattern(), &ing.data.sizes(), args.b, args.seed, &config)?
        }
        BootstrapMethod::Nonparametric => nonparametric_replicates(&ing.data, args.b, args.seed, &config)?,
    };
    let report = summarize(&replicates, |p| stat.evaluate(p))?;
    if report.failures > 0 {
        log::warn!("{} of {} replicates failed to converge and were excluded", report.failures, report.b);
    }

    create_dir(&args.out_dir)?;
    write_json(
        &args.out_dir.join(REPORT_FILE),
        &Report {
            method: args.method,
            statistic: &args.stat,
            seed: args.seed,
            estimate: stat.evaluate(&mle)?,
            report: &report,
        },
    )?;
    manifest
        .output(REPORT_FILE)
        .details(json!({ "se": report.se, "failures": report.failures }))
        .write(&args.out_dir)
}
