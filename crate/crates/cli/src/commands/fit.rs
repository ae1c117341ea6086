use linfa_core::{fit, Start};
use serde_json::json;

use super::{check_dimension, fit_config, read_params, write_params, LAMBDA_FILE, PSI_FILE, SIGMA_FILE};
use crate::args::FitArgs;
use crate::csvio::{create_dir, fmt_f64, CsvOut};
use crate::error::{CliError, CliResult};
use crate::ingest::ingest;
use crate::manifest::ManifestBuilder;

pub const TRACE_FILE: &str = "loglik_trace.csv";

pub fn run(args: &FitArgs) -> CliResult<()> {
    let mut manifest = ManifestBuilder::new("fit", serde_json::to_value(args).unwrap_or_default(), None);
    let ing = ingest(&args.input)?;
    manifest.ingestion(&ing)?;
    let mut config = fit_config(args.q as usize, &args.em);
    if let Some(dir) = &args.start {
        let (_, start) = read_params(dir)?;
        check_dimension("start values", ing.d(), start.d())?;
        if start.q() != config.q {
            return Err(CliError::Usage(format!(
                "start values have {} factors, --q is {}",
                start.q(),
                config.q
            )));
        }
        manifest.inputs(&[dir.join(LAMBDA_FILE), dir.join(PSI_FILE)])?;
        config.start = Start::Provided(start);
    }
    let result = fit(&ing.data, &config)?;

    create_dir(&args.out_dir)?;
    write_params(&args.out_dir, &ing.names, &result.params)?;
    let mut trace = CsvOut::create(&args.out_dir.join(TRACE_FILE))?;
    trace.row(["iteration", "loglik"])?;
    for (t, ll) in result.loglik_trace.iter().enumerate() {
        trace.row([t.to_string(), fmt_f64(*ll)])?;
    }
    trace.finish()?;

    manifest
        .output(LAMBDA_FILE)
        .output(PSI_FILE)
        .output(SIGMA_FILE)
        .output(TRACE_FILE)
        .details(json!({
            "converged": result.converged,
            "iterations": result.iterations,
            "loglik": result.loglik(),
            "blocks": result.partition.blocks.iter().map(|b| b.iter().map(|v| v + 1).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "coordinates": "centered",
        }))
        .write(&args.out_dir)?;
    log::info!(
        "fit: {} iterations, loglik {:.6}, converged {}",
        result.iterations,
        result.loglik(),
        result.converged
    );
    if result.converged {
        Ok(())
    } else {
        Err(CliError::NotConverged {
            iterations: result.iterations,
        })
    }
}
