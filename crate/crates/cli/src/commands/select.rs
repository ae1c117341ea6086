use linfa_core::selection::{select_q, Criterion, SelectionReport};
use serde::Serialize;
use serde_json::json;

use super::{fit_config, parse_grid};
use crate::args::{CriterionArg, SelectArgs};
use crate::csvio::create_dir;
use crate::error::{CliError, CliResult};
use crate::ingest::ingest;
use crate::manifest::{write_json, ManifestBuilder};

pub const REPORT_FILE: &str = "selection_report.json";

#[derive(Serialize)]
struct Report<'a> {
    d: usize,
    n: usize,
    #[serde(flatten)]
    report: &'a SelectionReport,
}

pub fn run(args: &SelectArgs) -> CliResult<()> {
    let mut manifest = ManifestBuilder::new("select", serde_json::to_value(args).unwrap_or_default(), Some(args.seed));
    let grid = parse_grid(&args.q_grid)?;
    let criterion = match args.criterion {
        CriterionArg::Aic => Criterion::Aic,
        CriterionArg::Cv => {
            if args.folds < 2 {
                return Err(CliError::Usage("--folds must be at least 2".into()));
            }
            Criterion::Cv {
                folds: args.folds,
                seed: args.seed,
            }
        }
    };
    let ing = ingest(&args.input)?;
    manifest.ingestion(&ing)?;
    let report = select_q(&ing.data, &grid, criterion, &fit_config(grid[0], &args.em))?;

    create_dir(&args.out_dir)?;
    write_json(
        &args.out_dir.join(REPORT_FILE),
        &Report {
            d: ing.d(),
            n: ing.data.total_rows(),
            report: &report,
        },
    )?;
    log::info!("select: chose q = {}", report.chosen_q);
    manifest
        .output(REPORT_FILE)
        .details(json!({ "chosen_q": report.chosen_q }))
        .write(&args.out_dir)
}
