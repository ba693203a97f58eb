//! Error metrics, the multi-model benchmark, and Borda ranking.

mod bench;
mod borda;
mod metrics;
mod report;

pub use bench::{run_benchmark, BenchConfig, BenchDataset, ModelVariant};
pub use borda::{borda, borda_counts, BordaTable};
pub use metrics::{mae, mre, Metric, MetricPair};
pub use report::{borda_csv, borda_text, CellResult, DatasetInfo, EvalReport};
