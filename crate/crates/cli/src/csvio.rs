//! CSV reading and writing. Numbers are written with 17 significant digits so
//! that every `f64` survives a round trip.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{CliError, CliResult};

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// A raw table: header names and cells, with missing cells as `None`.
/// The original text of every present cell is kept.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<Cell>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub text: String,
    pub value: f64,
}

fn is_missing(s: &str) -> bool {
    s.is_empty() || s == "NA"
}

fn parse_number(s: &str, path: &Path, row: usize, col: usize) -> CliResult<f64> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(CliError::Input(format!(
            "{}: row {row}, column {col}: cannot parse {s:?} as a finite number",
            path.display()
        ))),
    }
}

fn reader(path: &Path) -> CliResult<csv::Reader<File>> {
    let file = File::open(path).map_err(CliError::io(format!("opening {}", path.display())))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Input(format!("{}: {e}", path.display()))
}

/// Reads a headed CSV in which empty cells and `NA` mark missing values.
pub fn read_table(path: &Path) -> CliResult<Table> {
    let mut rdr = reader(path)?;
    let header: Vec<String> = rdr.headers().map_err(csv_error(path))?.iter().map(str::to_string).collect();
    if header.is_empty() {
        return Err(CliError::Input(format!("{}: empty header", path.display())));
    }
    let mut rows = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_error(path))?;
        if record.len() != header.len() {
            return Err(CliError::Input(format!(
                "{}: row {} has {} cells, header has {}",
                path.display(),
                r + 1,
                record.len(),
                header.len()
            )));
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(c, s)| {
                if is_missing(s) {
                    Ok(None)
                } else {
                    Ok(Some(Cell {
                        text: s.to_string(),
                        value: parse_number(s, path, r + 1, c + 1)?,
                    }))
                }
            })
            .collect::<CliResult<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

/// Reads a headed CSV with no missing cells into a matrix.
pub fn read_matrix(path: &Path) -> CliResult<(Vec<String>, DMatrix<f64>)> {
    let table = read_table(path)?;
    let (n, d) = (table.rows.len(), table.header.len());
    let mut m = DMatrix::zeros(n, d);
    for (r, row) in table.rows.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            m[(r, c)] = cell
                .as_ref()
                .ok_or_else(|| {
                    CliError::Input(format!("{}: missing value at row {}, column {}", path.display(), r + 1, c + 1))
                })?
                .value;
        }
    }
    Ok((table.header, m))
}

/// Reads a matrix whose first column holds row labels.
pub fn read_labeled_matrix(path: &Path) -> CliResult<(Vec<String>, Vec<String>, DMatrix<f64>)> {
    let mut rdr = reader(path)?;
    let header: Vec<String> = rdr.headers().map_err(csv_error(path))?.iter().skip(1).map(str::to_string).collect();
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_error(path))?;
        if record.len() != header.len() + 1 {
            return Err(CliError::Input(format!("{}: row {} has the wrong width", path.display(), r + 1)));
        }
        labels.push(record[0].to_string());
        for (c, s) in record.iter().skip(1).enumerate() {
            values.push(parse_number(s, path, r + 1, c + 2)?);
        }
    }
    let m = DMatrix::from_row_slice(labels.len(), header.len(), &values);
    Ok((header, labels, m))
}

pub struct CsvOut {
    path: String,
    out: BufWriter<File>,
}

impl CsvOut {
    pub fn create(path: &Path) -> CliResult<Self> {
        let file = File::create(path).map_err(CliError::io(format!("creating {}", path.display())))?;
        Ok(Self {
            path: path.display().to_string(),
            out: BufWriter::new(file),
        })
    }

    pub fn row<I, S>(&mut self, cells: I) -> CliResult<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut first = true;
        for cell in cells {
            if !first {
                self.out.write_all(b",").map_err(CliError::io(self.path.clone()))?;
            }
            first = false;
            self.out.write_all(quote(cell.as_ref()).as_bytes()).map_err(CliError::io(self.path.clone()))?;
        }
        self.out.write_all(b"\n").map_err(CliError::io(self.path.clone()))
    }

    pub fn finish(mut self) -> CliResult<()> {
        self.out.flush().map_err(CliError::io(self.path))
    }
}

fn quote(s: &str) -> std::borrow::Cow<'_, str> {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\"")).into()
    } else {
        s.into()
    }
}

pub fn write_matrix(path: &Path, header: &[String], m: &DMatrix<f64>) -> CliResult<()> {
    let mut out = CsvOut::create(path)?;
    out.row(header)?;
    for r in 0..m.nrows() {
        out.row(m.row(r).iter().map(|&v| fmt_f64(v)))?;
    }
    out.finish()
}

pub fn write_labeled_matrix(path: &Path, corner: &str, header: &[String], labels: &[String], m: &DMatrix<f64>) -> CliResult<()> {
    let mut out = CsvOut::create(path)?;
    out.row(std::iter::once(corner.to_string()).chain(header.iter().cloned()))?;
    for (r, label) in labels.iter().enumerate() {
        out.row(std::iter::once(label.clone()).chain(m.row(r).iter().map(|&v| fmt_f64(v))))?;
    }
    out.finish()
}

pub fn write_labeled_vector(path: &Path, corner: &str, name: &str, labels: &[String], v: &DVector<f64>) -> CliResult<()> {
    let m = DMatrix::from_column_slice(v.len(), 1, v.as_slice());
    write_labeled_matrix(path, corner, &[name.to_string()], labels, &m)
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(CliError::io(format!("creating {}", path.display())))
}
