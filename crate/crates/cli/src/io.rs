//! Instance files: CSV with a header row, and a plain-text sparse format.
//!
//! The sparse format is
//!
//! ```text
//! m n nnz
//! row col value        (nnz lines, 0-indexed)
//! y_1 ... y_m          (m lines)
//! z_1 ... z_m          (m lines)
//! ```
//!
//! Writers print every number with 17 significant digits so that a written
//! instance loads back bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use spgls_core::synth::synthesize_targets;
use spgls_core::{CscMatrix, DMatrix, DVector, FeatureMatrix, ProblemData};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("entry ({row}, {col}) at line {line} is outside a {nrows}x{ncols} matrix")]
    IndexOutOfRange { line: usize, row: usize, col: usize, nrows: usize, ncols: usize },
    #[error(transparent)]
    Invalid(#[from] spgls_core::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// How to read a CSV file into a game instance.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvSchema {
    pub y_column: String,
    /// Column holding the provider targets. When absent, `synthesize` must
    /// be given.
    pub z_column: Option<String>,
    /// Feature columns in order; `None` takes every other column.
    pub feature_columns: Option<Vec<String>>,
    pub gamma: f64,
    /// `(scale, seed)` for `z = y + scale * sd(y) * u` when there is no z column.
    pub synthesize: Option<(f64, u64)>,
}

impl CsvSchema {
    /// Features `x0..`, labels `y`, targets `z`: the layout [`write_csv`] emits.
    pub fn standard(gamma: f64) -> Self {
        Self { y_column: "y".into(), z_column: Some("z".into()), feature_columns: None, gamma, synthesize: None }
    }
}

fn parse_number(text: &str, line: usize, column: usize) -> Result<f64, DataError> {
    text.trim().parse::<f64>().map_err(|e| DataError::Parse {
        line,
        column,
        message: format!("{e} in {:?}", text),
    })
}

pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<ProblemData, DataError> {
    let text = fs::read_to_string(path)?;
    parse_csv(&text, schema)
}

pub fn parse_csv(text: &str, schema: &CsvSchema) -> Result<ProblemData, DataError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(csv_error)?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::Schema(format!("column {name:?} not found")))
    };
    let y_idx = find(&schema.y_column)?;
    let z_idx = schema.z_column.as_deref().map(find).transpose()?;
    if z_idx.is_none() && schema.synthesize.is_none() {
        return Err(DataError::Schema("no z column and no scenario to synthesize one".into()));
    }
    let feature_idx: Vec<usize> = match &schema.feature_columns {
        Some(names) => names.iter().map(|n| find(n)).collect::<Result<_, _>>()?,
        None => (0..headers.len()).filter(|&i| i != y_idx && Some(i) != z_idx).collect(),
    };
    if feature_idx.is_empty() {
        return Err(DataError::Schema("no feature columns".into()));
    }
    if feature_idx.contains(&y_idx) || z_idx.is_some_and(|z| feature_idx.contains(&z)) {
        return Err(DataError::Schema("a feature column doubles as y or z".into()));
    }

    let (mut xs, mut ys, mut zs) = (Vec::new(), Vec::new(), Vec::new());
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let cell = |i: usize| -> Result<f64, DataError> {
            let text = record.get(i).ok_or_else(|| DataError::Parse {
                line,
                column: i + 1,
                message: "missing cell".into(),
            })?;
            parse_number(text, line, i + 1)
        };
        for &i in &feature_idx {
            xs.push(cell(i)?);
        }
        ys.push(cell(y_idx)?);
        if let Some(z) = z_idx {
            zs.push(cell(z)?);
        }
    }
    let m = ys.len();
    let n = feature_idx.len();
    let x = DMatrix::from_row_slice(m, n, &xs);
    let y = DVector::from_vec(ys);
    let z = match (z_idx, schema.synthesize) {
        (Some(_), _) => DVector::from_vec(zs),
        (None, Some((scale, seed))) => synthesize_targets(&y, scale, seed),
        (None, None) => unreachable!(),
    };
    Ok(ProblemData::new(FeatureMatrix::Dense(x), y, z, schema.gamma)?)
}

fn csv_error(e: csv::Error) -> DataError {
    let (line, column) = match e.position() {
        Some(p) => (p.line() as usize, 0),
        None => (0, 0),
    };
    DataError::Parse { line, column, message: e.to_string() }
}

/// Writes `x0, .., x{n-1}, y, z` with a header row.
pub fn write_csv(data: &ProblemData, path: &Path) -> Result<(), DataError> {
    fs::write(path, format_csv(data))?;
    Ok(())
}

pub fn format_csv(data: &ProblemData) -> String {
    let x = data.x.to_dense();
    let (m, n) = (data.m(), data.n());
    let mut out = String::new();
    for j in 0..n {
        let _ = write!(out, "x{j},");
    }
    out.push_str("y,z\n");
    for i in 0..m {
        for j in 0..n {
            let _ = write!(out, "{:.16e},", x[(i, j)]);
        }
        let _ = writeln!(out, "{:.16e},{:.16e}", data.y[i], data.z[i]);
    }
    out
}

/// Reads the sparse text format. `gamma` is not stored in the file.
pub fn load_sparse(path: &Path, gamma: f64) -> Result<ProblemData, DataError> {
    let text = fs::read_to_string(path)?;
    parse_sparse(&text, gamma)
}

pub fn parse_sparse(text: &str, gamma: f64) -> Result<ProblemData, DataError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| !l.trim().is_empty());
    let mut next_line = |what: &str| {
        lines.next().ok_or_else(|| DataError::Parse { line: 0, column: 0, message: format!("unexpected end of file before {what}") })
    };

    let (hline, header) = next_line("the header")?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(DataError::Parse { line: hline, column: 1, message: "header must be `m n nnz`".into() });
    }
    let count = |k: usize| -> Result<usize, DataError> {
        fields[k].parse::<usize>().map_err(|e| DataError::Parse { line: hline, column: k + 1, message: e.to_string() })
    };
    let (m, n, nnz) = (count(0)?, count(1)?, count(2)?);
    if m == 0 || n == 0 {
        return Err(spgls_core::Error::Empty.into());
    }

    let mut triplets = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        let (line, text) = next_line("a matrix entry")?;
        let parts: Vec<&str> = text.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(DataError::Parse { line, column: 1, message: "entry must be `row col value`".into() });
        }
        let index = |k: usize| -> Result<usize, DataError> {
            parts[k].parse::<usize>().map_err(|e| DataError::Parse { line, column: k + 1, message: e.to_string() })
        };
        let (row, col) = (index(0)?, index(1)?);
        let value = parse_number(parts[2], line, 3)?;
        if row >= m || col >= n {
            return Err(DataError::IndexOutOfRange { line, row, col, nrows: m, ncols: n });
        }
        triplets.push((row, col, value));
    }
    let mut block = |what: &str| -> Result<DVector<f64>, DataError> {
        let mut v = Vec::with_capacity(m);
        for _ in 0..m {
            let (line, text) = next_line(what)?;
            v.push(parse_number(text, line, 1)?);
        }
        Ok(DVector::from_vec(v))
    };
    let y = block("the y block")?;
    let z = block("the z block")?;
    if let Some((line, _)) = lines.next() {
        return Err(DataError::Parse { line, column: 1, message: "trailing content after the z block".into() });
    }
    let x = CscMatrix::from_triplets(m, n, &triplets)?;
    Ok(ProblemData::new(FeatureMatrix::Sparse(x), y, z, gamma)?)
}

pub fn write_sparse(data: &ProblemData, path: &Path) -> Result<(), DataError> {
    fs::write(path, format_sparse(data))?;
    Ok(())
}

pub fn format_sparse(data: &ProblemData) -> String {
    let triplets: Vec<(usize, usize, f64)> = match &data.x {
        FeatureMatrix::Sparse(x) => x.triplets().collect(),
        FeatureMatrix::Dense(x) => CscMatrix::from_dense(x, 0.0).triplets().collect(),
    };
    let mut out = String::new();
    let _ = writeln!(out, "{} {} {}", data.m(), data.n(), triplets.len());
    for (i, j, v) in triplets {
        let _ = writeln!(out, "{i} {j} {v:.16e}");
    }
    for v in data.y.iter().chain(data.z.iter()) {
        let _ = writeln!(out, "{v:.16e}");
    }
    out
}
