use crate::error::{Error, Result};
use crate::model::ImputationWindow;

use super::csv::SeriesTable;

/// Context and gap lengths of extracted windows, and the step between them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    pub before: usize,
    pub gap: usize,
    pub after: usize,
    pub stride: usize,
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec {
            before: 10,
            gap: 10,
            after: 10,
            stride: 1,
        }
    }
}

impl WindowSpec {
    pub fn new(before: usize, gap: usize, after: usize, stride: usize) -> Result<Self> {
        let spec = WindowSpec {
            before,
            gap,
            after,
            stride,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.before == 0 || self.gap == 0 || self.after == 0 || self.stride == 0 {
            return Err(Error::invalid(format!(
                "window lengths and stride must be >= 1 (before={}, gap={}, after={}, stride={})",
                self.before, self.gap, self.after, self.stride
            )));
        }
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.before + self.gap + self.after
    }

    pub fn with_stride(self, stride: usize) -> Self {
        WindowSpec { stride, ..self }
    }
}

/// Zero-based start rows of all windows that contain no missing row.
pub fn window_offsets(row_missing: &[bool], spec: &WindowSpec) -> Vec<usize> {
    let n = row_missing.len();
    let total = spec.total();
    if n < total {
        return Vec::new();
    }
    (0..=n - total)
        .step_by(spec.stride)
        .filter(|&o| !row_missing[o..o + total].iter().any(|&m| m))
        .collect()
}

/// Slides `spec` over the table's rows. A window touching any missing cell is
/// dropped. A table shorter than one window yields no windows and a warning.
pub fn extract_windows(table: &SeriesTable, spec: &WindowSpec) -> Result<Vec<ImputationWindow>> {
    spec.validate()?;
    if table.n_rows() < spec.total() {
        log::warn!(
            "{} rows cannot hold a window of {} rows; no windows extracted",
            table.n_rows(),
            spec.total()
        );
        return Ok(Vec::new());
    }
    let row_missing: Vec<bool> = (0..table.n_rows()).map(|r| table.row_missing(r)).collect();
    window_offsets(&row_missing, spec)
        .into_iter()
        .map(|o| {
            let rows = |from: usize, len: usize| (from..from + len).map(|r| table.row_vector(r)).collect();
            ImputationWindow::new(
                rows(o, spec.before),
                rows(o + spec.before, spec.gap),
                rows(o + spec.before + spec.gap, spec.after),
            )
        })
        .collect()
}
