use crate::error::{Error, Result};

use super::csv::SeriesTable;

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnStats {
    pub name: String,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

/// Per-column z-score statistics, computed from training rows only.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub columns: Vec<ColumnStats>,
}

impl NormStats {
    pub fn new(columns: Vec<ColumnStats>) -> Result<Self> {
        for c in &columns {
            if !(c.std > 0.0 && c.std.is_finite() && c.mean.is_finite()) {
                return Err(Error::invalid(format!(
                    "column {:?} has degenerate statistics (mean {}, std {})",
                    c.name, c.mean, c.std
                )));
            }
        }
        Ok(NormStats { columns })
    }

    /// Statistics of every column over its observed cells. A constant column
    /// gets std 1 so that it is only centred.
    pub fn from_table(train: &SeriesTable) -> Result<Self> {
        let mut columns = Vec::with_capacity(train.n_cols());
        for c in 0..train.n_cols() {
            let observed: Vec<f64> = train
                .column(c)
                .iter()
                .zip(train.missing_mask(c))
                .filter(|(_, &m)| !m)
                .map(|(&v, _)| v)
                .collect();
            let name = train.names()[c].clone();
            if observed.is_empty() {
                return Err(Error::invalid(format!(
                    "column {name:?} has no observed training values"
                )));
            }
            let n = observed.len() as f64;
            let mean = observed.iter().sum::<f64>() / n;
            let var = observed.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let mut std = var.sqrt();
            if std == 0.0 {
                log::warn!("column {name:?} is constant on the training rows; scaling by 1");
                std = 1.0;
            }
            columns.push(ColumnStats { name, mean, std });
        }
        NormStats::new(columns)
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    fn check(&self, table: &SeriesTable) -> Result<()> {
        if table.n_cols() != self.columns.len() {
            return Err(Error::shape(
                "normalization columns",
                self.columns.len(),
                table.n_cols(),
            ));
        }
        Ok(())
    }

    pub fn normalize(&self, table: &SeriesTable) -> Result<SeriesTable> {
        self.check(table)?;
        Ok(table.map_columns(|c, v| self.normalize_value(c, v)))
    }

    pub fn denormalize(&self, table: &SeriesTable) -> Result<SeriesTable> {
        self.check(table)?;
        Ok(table.map_columns(|c, v| self.denormalize_value(c, v)))
    }

    pub fn normalize_value(&self, col: usize, x: f64) -> f64 {
        let s = &self.columns[col];
        (x - s.mean) / s.std
    }

    pub fn denormalize_value(&self, col: usize, z: f64) -> f64 {
        let s = &self.columns[col];
        z * s.std + s.mean
    }
}
