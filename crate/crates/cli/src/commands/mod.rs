//! One module per subcommand plus the parameter files they share.

pub mod bootstrap;
pub mod complete;
pub mod fit;
pub mod graph;
pub mod select;
pub mod simulate;

use std::path::Path;

use linfa_core::{assemble_covariance, FactorParams, FitConfig};
use nalgebra::DVector;

use crate::args::EmArgs;
use crate::csvio::{read_labeled_matrix, write_labeled_matrix, write_labeled_vector};
use crate::error::{CliError, CliResult};

pub const LAMBDA_FILE: &str = "lambda.csv";
pub const PSI_FILE: &str = "psi.csv";
pub const SIGMA_FILE: &str = "sigma.csv";

pub fn fit_config(q: usize, em: &EmArgs) -> FitConfig<f64> {
    FitConfig {
        tol: em.tol,
        max_iter: em.max_iter,
        psi_floor: em.psi_floor,
        ..FitConfig::new(q)
    }
}

fn factor_names(q: usize) -> Vec<String> {
    (1..=q).map(|j| format!("factor_{j}")).collect()
}

/// Writes `lambda.csv`, `psi.csv` and `sigma.csv`, each with variable names
/// in the first column.
pub fn write_params(dir: &Path, names: &[String], params: &FactorParams<f64>) -> CliResult<()> {
    write_labeled_matrix(&dir.join(LAMBDA_FILE), "variable", &factor_names(params.q()), names, params.lambda())?;
    write_labeled_vector(&dir.join(PSI_FILE), "variable", "psi", names, params.psi())?;
    write_labeled_matrix(&dir.join(SIGMA_FILE), "variable", names, names, &assemble_covariance(params))
}

/// Reads the parameters written by [`write_params`].
pub fn read_params(dir: &Path) -> CliResult<(Vec<String>, FactorParams<f64>)> {
    let (_, names, lambda) = read_labeled_matrix(&dir.join(LAMBDA_FILE))?;
    let (_, psi_names, psi) = read_labeled_matrix(&dir.join(PSI_FILE))?;
    if psi_names != names || psi.ncols() != 1 {
        return Err(CliError::Input(format!(
            "{}: {} and {} disagree",
            dir.display(),
            LAMBDA_FILE,
            PSI_FILE
        )));
    }
    let params = FactorParams::new(lambda, DVector::from_column_slice(psi.as_slice()))?;
    Ok((names, params))
}

pub fn check_dimension(what: &str, expected: usize, got: usize) -> CliResult<()> {
    if expected != got {
        return Err(CliError::Input(format!(
            "{what} has {got} variables, the data has {expected}"
        )));
    }
    Ok(())
}

pub fn parse_grid(s: &str) -> CliResult<Vec<usize>> {
    let grid = crate::args::parse_list(s).map_err(CliError::Usage)?;
    if grid.contains(&0) {
        return Err(CliError::Usage("factor counts must be at least 1".into()));
    }
    Ok(grid.into_iter().map(|q| q as usize).collect())
}
