//! Getting series in and out: CSV ingestion, chronological splitting,
//! normalization, sliding-window extraction and synthetic data.

mod csv;
mod norm;
mod split;
mod synth;
mod window;

pub use self::csv::{load_csv, ColumnRef, CsvOptions, HeaderMode, RawCsv, SeriesTable};
pub use norm::{ColumnStats, NormStats};
pub use split::{split_rows, split_train_test};
pub use synth::{synth, SynthKind, SynthSpec};
pub use window::{extract_windows, window_offsets, WindowSpec};
