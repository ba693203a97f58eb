use crate::error::{Error, Result};
use crate::numerics::Vector;

/// One sample: observations before the gap, the gap's ground truth, and
/// observations after it, all in chronological order.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputationWindow {
    pub before: Vec<Vector>,
    pub missing: Vec<Vector>,
    pub after: Vec<Vector>,
}

impl ImputationWindow {
    pub fn new(before: Vec<Vector>, missing: Vec<Vector>, after: Vec<Vector>) -> Result<Self> {
        if before.is_empty() || after.is_empty() || missing.is_empty() {
            return Err(Error::invalid(format!(
                "window needs non-empty before/missing/after (got {}/{}/{})",
                before.len(),
                missing.len(),
                after.len()
            )));
        }
        let dim = before[0].len();
        if dim == 0 {
            return Err(Error::invalid("window vectors must have dimension >= 1"));
        }
        for (part, seq) in [("before", &before), ("missing", &missing), ("after", &after)] {
            if let Some((i, v)) = seq.iter().enumerate().find(|(_, v)| v.len() != dim) {
                return Err(Error::shape(format!("window {part}[{i}]"), dim, v.len()));
            }
        }
        Ok(ImputationWindow { before, missing, after })
    }

    /// Univariate convenience constructor.
    pub fn from_scalars(before: &[f64], missing: &[f64], after: &[f64]) -> Result<Self> {
        let wrap = |xs: &[f64]| xs.iter().map(|&x| Vector::from(vec![x])).collect();
        ImputationWindow::new(wrap(before), wrap(missing), wrap(after))
    }

    pub fn dim(&self) -> usize {
        self.before[0].len()
    }

    pub fn gap_len(&self) -> usize {
        self.missing.len()
    }
}
