use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Vector;

/// Named numeric columns with an explicit missing-value mask. Masked cells
/// hold `NaN`.
#[derive(Debug, Clone)]
pub struct SeriesTable {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    missing: Vec<Vec<bool>>,
}

impl SeriesTable {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>, missing: Vec<Vec<bool>>) -> Result<Self> {
        if names.len() != columns.len() || names.len() != missing.len() {
            return Err(Error::shape("series table columns", names.len(), columns.len()));
        }
        let rows = columns.first().map_or(0, Vec::len);
        for (i, (c, m)) in columns.iter().zip(&missing).enumerate() {
            if c.len() != rows || m.len() != rows {
                return Err(Error::shape(
                    format!("column {:?}", names[i]),
                    rows,
                    c.len().min(m.len()),
                ));
            }
            for (r, (&v, &is_missing)) in c.iter().zip(m).enumerate() {
                if !is_missing && !v.is_finite() {
                    return Err(Error::NonFinite(format!("column {:?} row {}", names[i], r + 1)));
                }
            }
        }
        let columns = columns
            .into_iter()
            .zip(&missing)
            .map(|(c, m)| {
                c.into_iter()
                    .zip(m)
                    .map(|(v, &is_m)| if is_m { f64::NAN } else { v })
                    .collect()
            })
            .collect();
        Ok(SeriesTable {
            names,
            columns,
            missing,
        })
    }

    /// Fully observed columns.
    pub fn from_columns(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        let missing = columns.iter().map(|c| vec![false; c.len()]).collect();
        SeriesTable::new(names, columns, missing)
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.columns[i]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn missing_mask(&self, i: usize) -> &[bool] {
        &self.missing[i]
    }

    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.missing[col][row]
    }

    /// True if any column is missing at `row`.
    pub fn row_missing(&self, row: usize) -> bool {
        self.missing.iter().any(|m| m[row])
    }

    pub fn row_vector(&self, row: usize) -> Vector {
        Vector::from(self.columns.iter().map(|c| c[row]).collect::<Vec<_>>())
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().flatten().filter(|&&m| m).count()
    }

    pub fn slice_rows(&self, range: std::ops::Range<usize>) -> SeriesTable {
        SeriesTable {
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| c[range.clone()].to_vec()).collect(),
            missing: self.missing.iter().map(|m| m[range.clone()].to_vec()).collect(),
        }
    }

    pub fn select(&self, cols: &[usize]) -> SeriesTable {
        SeriesTable {
            names: cols.iter().map(|&i| self.names[i].clone()).collect(),
            columns: cols.iter().map(|&i| self.columns[i].clone()).collect(),
            missing: cols.iter().map(|&i| self.missing[i].clone()).collect(),
        }
    }

    pub(crate) fn map_columns(&self, mut f: impl FnMut(usize, f64) -> f64) -> SeriesTable {
        let columns = self
            .columns
            .iter()
            .enumerate()
            .map(|(i, c)| c.iter().map(|&v| if v.is_nan() { v } else { f(i, v) }).collect())
            .collect();
        SeriesTable {
            names: self.names.clone(),
            columns,
            missing: self.missing.clone(),
        }
    }

    /// Observed `(min, max)` of a column, `None` if it is entirely missing.
    pub fn range(&self, col: usize) -> Option<(f64, f64)> {
        self.columns[col]
            .iter()
            .zip(&self.missing[col])
            .filter(|(_, &m)| !m)
            .fold(None, |acc, (&v, _)| match acc {
                None => Some((v, v)),
                Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
            })
    }

    /// Writes a header row and one row per sample; missing cells as `marker`.
    pub fn write_csv(&self, path: &Path, marker: &str) -> Result<()> {
        let mut out = String::new();
        out.push_str(&self.names.join(","));
        out.push('\n');
        for r in 0..self.n_rows() {
            let cells: Vec<String> = (0..self.n_cols())
                .map(|c| {
                    if self.missing[c][r] {
                        marker.to_string()
                    } else {
                        format!("{}", self.columns[c][r])
                    }
                })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Equal names and masks, and equal values wherever observed.
impl PartialEq for SeriesTable {
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names
            && self.missing == other.missing
            && self
                .columns
                .iter()
                .zip(&other.columns)
                .zip(&self.missing)
                .all(|((a, b), m)| a.iter().zip(b).zip(m).all(|((x, y), &is_m)| is_m || x == y))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnRef {
    Name(String),
    /// Zero-based position.
    Index(usize),
}

impl ColumnRef {
    /// Integers select by zero-based position, anything else by name.
    pub fn parse(s: &str) -> ColumnRef {
        match s.trim().parse::<usize>() {
            Ok(i) => ColumnRef::Index(i),
            Err(_) => ColumnRef::Name(s.trim().to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HeaderMode {
    /// Header present iff some first-row cell is neither numeric nor a
    /// missing marker.
    #[default]
    Auto,
    Present,
    Absent,
}

#[derive(Debug, Clone)]
pub struct CsvOptions {
    /// Empty selects every column.
    pub columns: Vec<ColumnRef>,
    pub header: HeaderMode,
    pub missing_markers: Vec<String>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            columns: Vec::new(),
            header: HeaderMode::Auto,
            missing_markers: vec!["NA".to_string(), String::new()],
        }
    }
}

/// Unparsed CSV contents, kept so that rewritten files can preserve every
/// cell that is not replaced.
#[derive(Debug, Clone)]
pub struct RawCsv {
    pub header: Option<Vec<String>>,
    pub records: Vec<Vec<String>>,
}

impl RawCsv {
    pub fn read(path: &Path, header: HeaderMode, markers: &[String]) -> Result<Self> {
        let csv_err = |message: String| Error::Csv {
            path: path.to_path_buf(),
            message,
        };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(false)
            .from_path(path)
            .map_err(|e| match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::io(path, io),
                other => csv_err(format!("{other:?}")),
            })?;
        let mut records = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| csv_err(e.to_string()))?;
            records.push(rec.iter().map(str::to_string).collect::<Vec<_>>());
        }
        let has_header = match header {
            HeaderMode::Present => true,
            HeaderMode::Absent => false,
            HeaderMode::Auto => records.first().is_some_and(|first| {
                first.iter().any(|cell| {
                    let c = cell.trim();
                    c.parse::<f64>().is_err() && !markers.iter().any(|m| m == c)
                })
            }),
        };
        let header = if has_header && !records.is_empty() {
            Some(records.remove(0))
        } else {
            None
        };
        Ok(RawCsv { header, records })
    }

    pub fn n_cols(&self) -> usize {
        self.header.as_ref().or(self.records.first()).map_or(0, Vec::len)
    }

    pub fn column_names(&self) -> Vec<String> {
        match &self.header {
            Some(h) => h.iter().map(|s| s.trim().to_string()).collect(),
            None => (0..self.n_cols()).map(|i| format!("col{i}")).collect(),
        }
    }

    pub fn resolve(&self, col: &ColumnRef) -> Result<usize> {
        let n = self.n_cols();
        match col {
            ColumnRef::Index(i) if *i < n => Ok(*i),
            ColumnRef::Index(i) => Err(Error::invalid(format!("column index {i} out of range ({n} columns)"))),
            ColumnRef::Name(name) => self
                .column_names()
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::invalid(format!("unknown column {name:?}"))),
        }
    }

    /// 1-based line number of a data record in the source file.
    pub fn line_of(&self, record: usize) -> usize {
        record + 1 + usize::from(self.header.is_some())
    }

    pub fn to_table(&self, path: &Path, opts: &CsvOptions) -> Result<SeriesTable> {
        let idx: Vec<usize> = if opts.columns.is_empty() {
            (0..self.n_cols()).collect()
        } else {
            opts.columns.iter().map(|c| self.resolve(c)).collect::<Result<_>>()?
        };
        let names = self.column_names();
        let mut columns = vec![Vec::with_capacity(self.records.len()); idx.len()];
        let mut missing = vec![Vec::with_capacity(self.records.len()); idx.len()];
        for (r, rec) in self.records.iter().enumerate() {
            for (k, &c) in idx.iter().enumerate() {
                let cell = rec[c].trim();
                if opts.missing_markers.iter().any(|m| m == cell) {
                    columns[k].push(f64::NAN);
                    missing[k].push(true);
                    continue;
                }
                match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => {
                        columns[k].push(v);
                        missing[k].push(false);
                    }
                    _ => {
                        return Err(Error::Csv {
                            path: path.to_path_buf(),
                            message: format!(
                                "line {}, column {:?}: cannot parse {cell:?} as a number",
                                self.line_of(r),
                                names[c]
                            ),
                        })
                    }
                }
            }
        }
        SeriesTable::new(idx.iter().map(|&i| names[i].clone()).collect(), columns, missing)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::WriterBuilder::new().from_path(path).map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let to_err = |e: csv::Error| Error::Csv {
            path: path.to_path_buf(),
            message: e.to_string(),
        };
        if let Some(h) = &self.header {
            w.write_record(h).map_err(to_err)?;
        }
        for rec in &self.records {
            w.write_record(rec).map_err(to_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub fn load_csv(path: &Path, opts: &CsvOptions) -> Result<SeriesTable> {
    RawCsv::read(path, opts.header, &opts.missing_markers)?.to_table(path, opts)
}
