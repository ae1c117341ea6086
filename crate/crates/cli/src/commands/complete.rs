use std::collections::HashMap;
use std::path::PathBuf;

use linfa_core::completion::FactorPredictor;
use nalgebra::DVector;
use serde_json::json;

use super::{check_dimension, read_params, LAMBDA_FILE, PSI_FILE};
use crate::args::CompleteArgs;
use crate::csvio::{fmt_f64, CsvOut};
use crate::error::CliResult;
use crate::ingest::ingest;
use crate::manifest::ManifestBuilder;

pub fn mask_path(out: &std::path::Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "completed".into());
    out.with_file_name(format!("{stem}_mask.csv"))
}

/// Completes every input row from its own observed entries. Observed cells
/// are copied verbatim; predicted cells are `Lambda z_hat` plus the column mean.
pub fn run(args: &CompleteArgs) -> CliResult<()> {
    let mut manifest = ManifestBuilder::new("complete", serde_json::to_value(args).unwrap_or_default(), None);
    let ing = ingest(&args.input)?;
    manifest.ingestion(&ing)?;
    let (param_names, params) = read_params(&args.params_dir)?;
    check_dimension("parameters", ing.d(), params.d())?;
    if param_names != ing.names {
        log::warn!("variable names in {} differ from the input header", args.params_dir.display());
    }
    manifest.inputs(&[args.params_dir.join(LAMBDA_FILE), args.params_dir.join(PSI_FILE)])?;

    let d = ing.d();
    let mask_file = mask_path(&args.out);
    let mut out = CsvOut::create(&args.out)?;
    let mut mask = CsvOut::create(&mask_file)?;
    out.row(&ing.names)?;
    mask.row(&ing.names)?;
    let mut predictors: HashMap<Vec<usize>, FactorPredictor<f64>> = HashMap::new();
    let mut predicted_cells = 0usize;
    for row in &ing.rows {
        let z = if row.subset.is_empty() {
            DVector::zeros(params.q())
        } else {
            if !predictors.contains_key(&row.subset) {
                predictors.insert(row.subset.clone(), FactorPredictor::new(&params, &row.subset)?);
            }
            let x = DVector::from_iterator(
                row.subset.len(),
                row.subset
                    .iter()
                    .map(|&v| row.cells[v].as_ref().expect("observed").value - ing.means[v]),
            );
            predictors[&row.subset].predict(&x)?
        };
        let fitted = params.lambda() * z;
        let mut cells = Vec::with_capacity(d);
        let mut flags = Vec::with_capacity(d);
        for v in 0..d {
            match &row.cells[v] {
                Some(cell) => {
                    cells.push(cell.text.clone());
                    flags.push("0");
                }
                None => {
                    cells.push(fmt_f64(fitted[v] + ing.means[v]));
                    flags.push("1");
                    predicted_cells += 1;
                }
            }
        }
        out.row(&cells)?;
        mask.row(&flags)?;
    }
    out.finish()?;
    mask.finish()?;

    manifest
        .output(args.out.display().to_string())
        .output(mask_file.display().to_string())
        .details(json!({ "rows": ing.rows.len(), "predicted_cells": predicted_cells }))
        .write_file(&manifest_path(&args.out))
}

pub fn manifest_path(out: &std::path::Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "completed".into());
    out.with_file_name(format!("{stem}_run_manifest.json"))
}
