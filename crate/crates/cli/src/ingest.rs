//! Reading data into a [`DatasetCollection`], either from a pattern manifest
//! that lists one CSV per dataset or from a single CSV with missing cells.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use linfa_core::{DatasetCollection, ObservationPattern};
use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::csvio::{self, fmt_f64, Cell, CsvOut};
use crate::error::{CliError, CliResult};

/// `{"d": int, "datasets": [{"path": str, "variables": [int...]}]}` with
/// 1-based variable indices and paths relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternManifest {
    pub d: usize,
    pub datasets: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub variables: Vec<usize>,
}

/// One input row: the variables it observes (0-based, sorted) and the cells
/// over all `d` variables.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    pub subset: Vec<usize>,
    pub cells: Vec<Option<Cell>>,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub names: Vec<String>,
    /// Data as read.
    pub raw: DatasetCollection<f64>,
    /// Data with the pooled means removed.
    pub data: DatasetCollection<f64>,
    pub means: DVector<f64>,
    /// Every input row in input order, including dropped rows.
    pub rows: Vec<RawRow>,
    pub dropped_rows: usize,
    pub sources: Vec<PathBuf>,
}

impl Ingested {
    fn build(names: Vec<String>, raw: DatasetCollection<f64>, rows: Vec<RawRow>, dropped_rows: usize, sources: Vec<PathBuf>) -> CliResult<Self> {
        let means = raw.pooled_means();
        let centered = raw
            .matrices()
            .iter()
            .zip(raw.pattern().subsets())
            .map(|(m, subset)| {
                let mut c = m.clone();
                for (col, &v) in subset.iter().enumerate() {
                    c.column_mut(col).add_scalar_mut(-means[v]);
                }
                c
            })
            .collect();
        let data = DatasetCollection::new(raw.pattern().clone(), centered)?;
        Ok(Self {
            names,
            raw,
            data,
            means,
            rows,
            dropped_rows,
            sources,
        })
    }

    pub fn d(&self) -> usize {
        self.names.len()
    }
}

pub fn is_manifest(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

pub fn ingest(path: &Path) -> CliResult<Ingested> {
    if is_manifest(path) {
        ingest_manifest(path)
    } else {
        ingest_single_csv(path)
    }
}

pub fn read_manifest(path: &Path) -> CliResult<PatternManifest> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(format!("reading {}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn ingest_manifest(path: &Path) -> CliResult<Ingested> {
    let manifest = read_manifest(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let d = manifest.d;
    let mut names: Vec<Option<String>> = vec![None; d];
    let mut subsets = Vec::new();
    let mut matrices = Vec::new();
    let mut rows = Vec::new();
    let mut sources = vec![path.to_path_buf()];
    for (k, entry) in manifest.datasets.iter().enumerate() {
        let file = base.join(&entry.path);
        let table = csvio::read_table(&file)?;
        let header = &table.header;
        if header.len() != entry.variables.len() {
            return Err(CliError::Input(format!(
                "{}: {} columns but {} variables listed for dataset {}",
                file.display(),
                header.len(),
                entry.variables.len(),
                k + 1
            )));
        }
        let mut order: Vec<usize> = (0..header.len()).collect();
        order.sort_by_key(|&c| entry.variables[c]);
        let mut subset = Vec::with_capacity(order.len());
        for &c in &order {
            let v = entry.variables[c];
            if v == 0 || v > d {
                return Err(CliError::Input(format!("dataset {}: variable {v} outside 1..={d}", k + 1)));
            }
            match &names[v - 1] {
                Some(existing) if *existing != header[c] => {
                    return Err(CliError::Input(format!(
                        "inconsistent headers: variable {v} is {existing:?} elsewhere but {:?} in {}",
                        header[c],
                        file.display()
                    )));
                }
                _ => names[v - 1] = Some(header[c].clone()),
            }
            subset.push(v - 1);
        }
        let mut m = DMatrix::zeros(table.rows.len(), subset.len());
        for (r, row) in table.rows.iter().enumerate() {
            let mut cells = vec![None; d];
            for (c, &src) in order.iter().enumerate() {
                let cell = row[src].clone().ok_or_else(|| {
                    CliError::Input(format!("{}: missing value at row {}, column {}", file.display(), r + 1, src + 1))
                })?;
                m[(r, c)] = cell.value;
                cells[subset[c]] = Some(cell);
            }
            rows.push(RawRow {
                subset: subset.clone(),
                cells,
            });
        }
        subsets.push(subset);
        matrices.push(m);
        sources.push(file);
    }
    let names = names
        .into_iter()
        .enumerate()
        .map(|(i, n)| n.ok_or_else(|| CliError::Input(format!("variable {} is never observed", i + 1))))
        .collect::<CliResult<Vec<_>>>()?;
    let pattern = ObservationPattern::new(d, subsets)?;
    let raw = DatasetCollection::new(pattern, matrices)?;
    Ingested::build(names, raw, rows, 0, sources)
}

fn ingest_single_csv(path: &Path) -> CliResult<Ingested> {
    let table = csvio::read_table(path)?;
    let d = table.header.len();
    let mut groups: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut rows = Vec::with_capacity(table.rows.len());
    let mut dropped = 0;
    for (r, cells) in table.rows.into_iter().enumerate() {
        let subset: Vec<usize> = (0..d).filter(|&c| cells[c].is_some()).collect();
        if subset.len() < 2 {
            dropped += 1;
        } else {
            let g = *index.entry(subset.clone()).or_insert_with(|| {
                groups.push((subset.clone(), Vec::new()));
                groups.len() - 1
            });
            groups[g].1.push(r);
        }
        rows.push(RawRow { subset, cells });
    }
    if dropped > 0 {
        warn!("dropped {dropped} row(s) with fewer than 2 observed values");
    }
    let mut observed = vec![false; d];
    for (subset, _) in &groups {
        for &v in subset {
            observed[v] = true;
        }
    }
    if let Some(v) = observed.iter().position(|o| !o) {
        return Err(CliError::Input(format!(
            "variable {} ({:?}) is never observed",
            v + 1,
            table.header[v]
        )));
    }
    let singletons = groups.iter().filter(|(_, members)| members.len() == 1).count();
    if singletons >= 10 && 2 * singletons > groups.len() {
        warn!("{singletons} of {} missingness patterns occur in a single row", groups.len());
    }
    let mut subsets = Vec::with_capacity(groups.len());
    let mut matrices = Vec::with_capacity(groups.len());
    for (subset, members) in groups {
        let m = DMatrix::from_fn(members.len(), subset.len(), |i, c| {
            rows[members[i]].cells[subset[c]].as_ref().map_or(f64::NAN, |cell| cell.value)
        });
        subsets.push(subset);
        matrices.push(m);
    }
    let pattern = ObservationPattern::new(d, subsets)?;
    let raw = DatasetCollection::new(pattern, matrices)?;
    Ingested::build(table.header, raw, rows, dropped, vec![path.to_path_buf()])
}

/// Writes `data` as one CSV per dataset plus `manifest.json` in `dir` and
/// returns the manifest path.
pub fn export_manifest(names: &[String], data: &DatasetCollection<f64>, dir: &Path) -> CliResult<PathBuf> {
    csvio::create_dir(dir)?;
    let mut datasets = Vec::with_capacity(data.k());
    for (k, (m, subset)) in data.matrices().iter().zip(data.pattern().subsets()).enumerate() {
        let file = format!("dataset_{}.csv", k + 1);
        let mut out = CsvOut::create(&dir.join(&file))?;
        out.row(subset.iter().map(|&v| names[v].as_str()))?;
        for r in 0..m.nrows() {
            out.row(m.row(r).iter().map(|&v| fmt_f64(v)))?;
        }
        out.finish()?;
        datasets.push(ManifestEntry {
            path: file,
            variables: subset.iter().map(|v| v + 1).collect(),
        });
    }
    let manifest = PatternManifest { d: data.d(), datasets };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(CliError::io(format!("writing {}", path.display())))?;
    Ok(path)
}
