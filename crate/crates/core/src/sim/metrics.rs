use nalgebra::DMatrix;

use crate::covariance::assemble_covariance;
use crate::error::{LinfaError, Result};
use crate::model::{FactorParams, PairSet};

/// Which unordered pairs `i < j` enter a pairwise risk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairSelection {
    All,
    Observed,
    Unobserved,
}

/// Mean squared difference over the selected pairs `i < j`.
pub fn correlation_risk(
    estimate: &DMatrix<f64>,
    truth: &DMatrix<f64>,
    pairs: &PairSet,
    selection: PairSelection,
) -> Result<f64> {
    if estimate.shape() != truth.shape() || estimate.nrows() != pairs.d() {
        return Err(LinfaError::Shape(format!(
            "estimate {:?}, truth {:?}, pair set over {} variables",
            estimate.shape(),
            truth.shape(),
            pairs.d()
        )));
    }
    let d = pairs.d();
    let (mut total, mut count) = (0.0, 0usize);
    for i in 0..d {
        for j in i + 1..d {
            let keep = match selection {
                PairSelection::All => true,
                PairSelection::Observed => pairs.contains(i, j),
                PairSelection::Unobserved => !pairs.contains(i, j),
            };
            if keep {
                let e = estimate[(i, j)] - truth[(i, j)];
                total += e * e;
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(LinfaError::EmptySelection("no entries selected".into()));
    }
    Ok(total / count as f64)
}

/// `(d^-2 sum_ij ([L L^T]_ij - [L0 L0^T]_ij)^2, d^-1 sum_i (psi_i - psi0_i)^2)`.
pub fn component_risks(estimate: &FactorParams<f64>, truth: &FactorParams<f64>) -> Result<(f64, f64)> {
    let d = truth.d();
    if estimate.d() != d {
        return Err(LinfaError::Shape(format!("{} vs {} variables", estimate.d(), d)));
    }
    let ll_hat = estimate.lambda() * estimate.lambda().transpose();
    let ll = truth.lambda() * truth.lambda().transpose();
    let loadings = (ll_hat - ll).norm_squared() / (d * d) as f64;
    let psi = (estimate.psi() - truth.psi()).norm_squared() / d as f64;
    Ok((loadings, psi))
}

/// `tr(Z^T Zh (Zh^T Zh)^{-1} Zh^T Z) / tr(Z^T Z)`.
pub fn trace_r2(z: &DMatrix<f64>, z_hat: &DMatrix<f64>) -> Result<f64> {
    if z.nrows() != z_hat.nrows() {
        return Err(LinfaError::Shape(format!("{} vs {} rows", z.nrows(), z_hat.nrows())));
    }
    let gram = z_hat.transpose() * z_hat;
    let chol = gram.cholesky().ok_or_else(|| {
        LinfaError::Degenerate("predicted factors have a singular Gram matrix".into())
    })?;
    let cross = z_hat.transpose() * z;
    let num = (cross.transpose() * chol.solve(&cross)).trace();
    let den = z.norm_squared();
    if !(den > 0.0) {
        return Err(LinfaError::Degenerate("true factors are all zero".into()));
    }
    Ok(num / den)
}

/// Pearson correlation between true and completed values over the masked cells.
pub fn completion_accuracy(x_full: &DMatrix<f64>, x_hat: &DMatrix<f64>, mask: &[Vec<bool>]) -> Result<f64> {
    if x_full.shape() != x_hat.shape() || mask.len() != x_full.nrows() {
        return Err(LinfaError::Shape(format!(
            "truth {:?}, completion {:?}, {} mask rows",
            x_full.shape(),
            x_hat.shape(),
            mask.len()
        )));
    }
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (r, row) in mask.iter().enumerate() {
        for (c, &m) in row.iter().enumerate() {
            if m {
                a.push(x_full[(r, c)]);
                b.push(x_hat[(r, c)]);
            }
        }
    }
    pearson(&a, &b)
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() {
        return Err(LinfaError::EmptySelection("no entries selected".into()));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if !(saa > 0.0 && sbb > 0.0) {
        return Err(LinfaError::Degenerate("zero variance in correlation".into()));
    }
    Ok(sab / (saa * sbb).sqrt())
}

/// Correlation matrix implied by the parameters.
pub fn implied_correlation(params: &FactorParams<f64>) -> Result<DMatrix<f64>> {
    crate::covariance::correlation_matrix(&assemble_covariance(params))
}
