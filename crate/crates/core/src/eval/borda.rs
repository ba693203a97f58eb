use crate::error::{Error, Result};

use super::metrics::Metric;
use super::report::EvalReport;

/// Borda counts for one dataset: the highest error receives 1, the lowest
/// receives N, and tied models share the mean of their counts.
pub fn borda_counts(errors: &[f64]) -> Result<Vec<f64>> {
    if let Some(i) = errors.iter().position(|e| !e.is_finite()) {
        return Err(Error::NonFinite(format!("error of model {i} is {}", errors[i])));
    }
    let n = errors.len();
    let mut order: Vec<usize> = (0..n).collect();
    // Descending error, so position k earns count k + 1.
    order.sort_by(|&a, &b| errors[b].total_cmp(&errors[a]));
    let mut counts = vec![0.0; n];
    let mut k = 0;
    while k < n {
        let mut end = k + 1;
        while end < n && errors[order[end]] == errors[order[k]] {
            end += 1;
        }
        // Mean of counts k+1 ..= end.
        let shared = (k + 1 + end) as f64 / 2.0;
        for &m in &order[k..end] {
            counts[m] = shared;
        }
        k = end;
    }
    Ok(counts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BordaTable {
    pub metric: Metric,
    pub models: Vec<String>,
    /// Per-dataset counts for each ranked dataset, in report order.
    pub per_dataset: Vec<(String, Vec<f64>)>,
    pub totals: Vec<f64>,
    /// Datasets left out because a cell failed or its metric was undefined.
    pub skipped: Vec<String>,
}

/// Sums per-dataset Borda counts of `metric` across the report. Datasets with
/// an incomplete row are skipped and listed.
pub fn borda(report: &EvalReport, metric: Metric) -> Result<BordaTable> {
    let models: Vec<String> = report.variants.iter().map(|v| v.to_string()).collect();
    let mut totals = vec![0.0; models.len()];
    let mut per_dataset = Vec::new();
    let mut skipped = Vec::new();
    for (d, row) in report.datasets.iter().zip(&report.cells) {
        let errors: Option<Vec<f64>> = row
            .iter()
            .map(|c| c.metrics.as_ref().ok().map(|m| m.get(metric)).filter(|v| v.is_finite()))
            .collect();
        match errors {
            Some(errors) => {
                let counts = borda_counts(&errors)?;
                for (t, c) in totals.iter_mut().zip(&counts) {
                    *t += c;
                }
                per_dataset.push((d.label(), counts));
            }
            None => skipped.push(d.label()),
        }
    }
    Ok(BordaTable {
        metric,
        models,
        per_dataset,
        totals,
        skipped,
    })
}
