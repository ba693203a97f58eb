use std::fmt::Write;

use super::bench::ModelVariant;
use super::borda::BordaTable;
use super::metrics::{Metric, MetricPair};

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetInfo {
    pub name: String,
    pub variable: String,
    /// Observed (min, max) over the whole series.
    pub range: (f64, f64),
    pub test_windows: usize,
}

impl DatasetInfo {
    pub fn label(&self) -> String {
        format!("{}:{}", self.name, self.variable)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    /// Error message for a failed cell.
    pub metrics: std::result::Result<MetricPair, String>,
    /// Number of pooled imputed points.
    pub points: usize,
}

/// Dataset × variant grid of test metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub variants: Vec<ModelVariant>,
    pub datasets: Vec<DatasetInfo>,
    /// `cells[dataset][variant]`.
    pub cells: Vec<Vec<CellResult>>,
}

fn fmt_num(v: f64) -> String {
    if v == 0.0 || (1e-3..1e6).contains(&v.abs()) {
        format!("{v:.4}")
    } else {
        format!("{v:.3e}")
    }
}

impl EvalReport {
    pub fn failed_cells(&self) -> Vec<(String, ModelVariant, String)> {
        let mut out = Vec::new();
        for (d, row) in self.datasets.iter().zip(&self.cells) {
            for (v, c) in self.variants.iter().zip(row) {
                if let Err(e) = &c.metrics {
                    out.push((d.label(), *v, e.clone()));
                }
            }
        }
        out
    }

    pub fn metric(&self, dataset: usize, variant: ModelVariant) -> Option<MetricPair> {
        let v = self.variants.iter().position(|&x| x == variant)?;
        self.cells.get(dataset)?.get(v)?.metrics.as_ref().ok().copied()
    }

    /// Aligned text table: one row per dataset:variable, a Range column, one
    /// column per variant. The lowest error in each row is starred.
    pub fn to_text(&self, metric: Metric) -> String {
        let mut header = vec![String::new(), "Range".to_string()];
        header.extend(self.variants.iter().map(|v| v.to_string()));
        let mut rows = vec![header];
        for (d, row) in self.datasets.iter().zip(&self.cells) {
            let vals: Vec<Option<f64>> = row
                .iter()
                .map(|c| c.metrics.as_ref().ok().map(|m| m.get(metric)).filter(|v| v.is_finite()))
                .collect();
            let best = vals.iter().flatten().copied().fold(f64::INFINITY, f64::min);
            let mut line = vec![d.label(), format!("[{},{}]", fmt_num(d.range.0), fmt_num(d.range.1))];
            line.extend(vals.iter().map(|v| match v {
                Some(v) if *v == best => format!("*{}", fmt_num(*v)),
                Some(v) => fmt_num(*v),
                None => "failed".to_string(),
            }));
            rows.push(line);
        }
        let mut s = format!("{metric} per dataset\n");
        s.push_str(&align(&rows));
        for (label, v, e) in self.failed_cells() {
            let _ = writeln!(s, "failed {label} {v}: {e}");
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("dataset,variable,model,range_min,range_max,test_windows,points,mae,mre,status\n");
        for (d, row) in self.datasets.iter().zip(&self.cells) {
            for (v, c) in self.variants.iter().zip(row) {
                let (mae, mre, status) = match &c.metrics {
                    Ok(m) => (m.mae.to_string(), m.mre.to_string(), "ok".to_string()),
                    Err(e) => (String::new(), String::new(), csv_quote(&format!("failed: {e}"))),
                };
                let _ = writeln!(
                    s,
                    "{},{},{v},{},{},{},{},{mae},{mre},{status}",
                    csv_quote(&d.name),
                    csv_quote(&d.variable),
                    d.range.0,
                    d.range.1,
                    d.test_windows,
                    c.points
                );
            }
        }
        s
    }
}

fn csv_quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|v| v.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut s = String::new();
    for r in rows {
        let cells: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(i, v)| {
                if i == 0 {
                    format!("{v:<w$}", w = widths[0])
                } else {
                    format!("{v:>w$}", w = widths[i])
                }
            })
            .collect();
        s.push_str(cells.join("  ").trim_end());
        s.push('\n');
    }
    s
}

/// Summed counts with one row per metric and one column per model.
pub fn borda_text(tables: &[BordaTable]) -> String {
    let Some(first) = tables.first() else {
        return String::new();
    };
    let mut header = vec![String::new()];
    header.extend(first.models.iter().cloned());
    let mut rows = vec![header];
    for t in tables {
        let mut line = vec![t.metric.to_string()];
        line.extend(t.totals.iter().map(|v| format!("{v}")));
        rows.push(line);
    }
    let mut s = String::from("Borda count totals (higher is better)\n");
    s.push_str(&align(&rows));
    for t in tables {
        if !t.skipped.is_empty() {
            let _ = writeln!(s, "{} skipped: {}", t.metric, t.skipped.join(", "));
        }
    }
    s
}

pub fn borda_csv(tables: &[BordaTable]) -> String {
    let mut s = String::from("metric,dataset,model,count\n");
    for t in tables {
        for (label, counts) in &t.per_dataset {
            for (m, c) in t.models.iter().zip(counts) {
                let _ = writeln!(s, "{},{},{m},{c}", t.metric, csv_quote(label));
            }
        }
        for (m, c) in t.models.iter().zip(&t.totals) {
            let _ = writeln!(s, "{},total,{m},{c}", t.metric);
        }
    }
    s
}
