use crate::error::{Error, Result};

fn check(truth: &[f64], pred: &[f64]) -> Result<()> {
    if truth.is_empty() {
        return Err(Error::invalid("metrics need at least one point"));
    }
    if truth.len() != pred.len() {
        return Err(Error::shape("metric prediction length", truth.len(), pred.len()));
    }
    Ok(())
}

fn abs_error_sum(truth: &[f64], pred: &[f64]) -> f64 {
    truth.iter().zip(pred).map(|(t, p)| (t - p).abs()).sum()
}

/// Mean absolute error.
pub fn mae(truth: &[f64], pred: &[f64]) -> Result<f64> {
    check(truth, pred)?;
    Ok(abs_error_sum(truth, pred) / truth.len() as f64)
}

/// Σ|truth − pred| / Σ|truth|.
pub fn mre(truth: &[f64], pred: &[f64]) -> Result<f64> {
    check(truth, pred)?;
    let mass: f64 = truth.iter().map(|t| t.abs()).sum();
    if mass == 0.0 {
        return Err(Error::invalid("relative error is undefined for an all-zero truth"));
    }
    Ok(abs_error_sum(truth, pred) / mass)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricPair {
    pub mae: f64,
    /// `NaN` when the truth has no mass.
    pub mre: f64,
}

impl MetricPair {
    pub fn compute(truth: &[f64], pred: &[f64]) -> Result<Self> {
        let mae = mae(truth, pred)?;
        let mre = match mre(truth, pred) {
            Ok(v) => v,
            Err(Error::InvalidArgument(_)) => f64::NAN,
            Err(e) => return Err(e),
        };
        Ok(MetricPair { mae, mre })
    }

    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Mae => self.mae,
            Metric::Mre => self.mre,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Mae,
    Mre,
}

impl Metric {
    pub const ALL: [Metric; 2] = [Metric::Mae, Metric::Mre];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Mae => "MAE",
            Metric::Mre => "MRE",
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}
