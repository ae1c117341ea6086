use linfa_core::sim::experiment::{generate_replicate, ExperimentRecord};
use linfa_core::sim::{run_experiment, summarize, ExperimentConfig, Method};
use serde_json::json;

use super::parse_grid;
use crate::args::{parse_list, SimulateArgs};
use crate::csvio::{create_dir, fmt_f64, CsvOut};
use crate::error::{CliError, CliResult};
use crate::ingest::export_manifest;
use crate::manifest::{write_json, ManifestBuilder};

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TIMINGS_FILE: &str = "timings.csv";

const RESULT_COLUMNS: [&str; 15] = [
    "seed",
    "method",
    "eta",
    "q_fit",
    "corr_risk_observed",
    "corr_risk_unobserved",
    "pcorr_risk_observed",
    "pcorr_risk_unobserved",
    "loadings_risk",
    "psi_risk",
    "trace_r2",
    "completion_corr",
    "iterations",
    "converged",
    "error",
];

fn opt_f64(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn result_row(r: &ExperimentRecord) -> Vec<String> {
    let mut row = vec![
        r.seed.to_string(),
        r.method.name().to_string(),
        fmt_f64(r.eta),
        r.q_fit.map(|q| q.to_string()).unwrap_or_default(),
    ];
    row.extend(ExperimentRecord::METRICS.iter().map(|m| opt_f64(r.metric(m))));
    row.push(r.iterations.map(|i| i.to_string()).unwrap_or_default());
    row.push(r.converged.map(|c| c.to_string()).unwrap_or_default());
    row.push(r.error.clone().unwrap_or_default());
    row
}

pub fn experiment_config(args: &SimulateArgs) -> CliResult<ExperimentConfig> {
    let seeds = parse_list(&args.seeds).map_err(CliError::Usage)?;
    let methods = args
        .methods
        .split(',')
        .map(|m| Method::parse(m.trim()).ok_or_else(|| CliError::Usage(format!("unknown method {m:?}"))))
        .collect::<CliResult<Vec<_>>>()?;
    let q = args.q as usize;
    let q_fit_grid = match &args.q_grid {
        Some(g) => parse_grid(g)?,
        None => vec![q],
    };
    Ok(ExperimentConfig {
        q_fit_grid,
        methods,
        tol: args.em.tol,
        max_iter: args.em.max_iter,
        psi_floor: args.em.psi_floor,
        ..ExperimentConfig::new(args.d, q, args.k, args.n, args.eta, seeds)
    })
}

pub fn run(args: &SimulateArgs) -> CliResult<()> {
    let mut manifest = ManifestBuilder::new("simulate", serde_json::to_value(args).unwrap_or_default(), None);
    let config = experiment_config(args)?;
    let out = run_experiment(&config)?;
    let unobserved = out.pattern.pair_set().unobserved_count();
    if unobserved == 0 {
        log::warn!("the pattern observes every pair; risks over unobserved pairs are left empty");
    }
    let failures = out.records.iter().filter(|r| r.error.is_some()).count();
    if failures > 0 {
        log::warn!("{failures} replicate fit(s) failed; see the error column");
    }

    create_dir(&args.out_dir)?;
    let mut results = CsvOut::create(&args.out_dir.join(RESULTS_FILE))?;
    results.row(RESULT_COLUMNS)?;
    for r in &out.records {
        results.row(result_row(r))?;
    }
    results.finish()?;

    let mut timings = CsvOut::create(&args.out_dir.join(TIMINGS_FILE))?;
    timings.row(["seed", "method", "seconds"])?;
    for t in &out.timings {
        timings.row([t.seed.to_string(), t.method.name().to_string(), format!("{:.6}", t.seconds)])?;
    }
    timings.finish()?;

    let summary = json!({
        "config": &config,
        "realized_eta": out.eta,
        "unobserved_pairs": unobserved,
        "unobserved_empty": unobserved == 0,
        "dataset_sizes": config.dataset_sizes(),
        "pattern": out.pattern.subsets().iter().map(|s| s.iter().map(|v| v + 1).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "failures": failures,
        "methods": summarize(&out.records),
    });
    write_json(&args.out_dir.join(SUMMARY_FILE), &summary)?;
    manifest.output(RESULTS_FILE).output(SUMMARY_FILE).output(TIMINGS_FILE);

    if let Some(dir) = &args.emit_data {
        let names: Vec<String> = (1..=config.d).map(|i| format!("x{i}")).collect();
        for &seed in &config.seeds {
            let rep = generate_replicate(&config, &out.pattern, seed)?;
            let path = export_manifest(&names, &rep.data, &dir.join(format!("seed_{seed}")))?;
            manifest.output(path.display().to_string());
        }
    }
    manifest
        .details(json!({ "realized_eta": out.eta, "records": out.records.len() }))
        .write(&args.out_dir)
}
