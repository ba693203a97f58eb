use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::data::{extract_windows, split_train_test, NormStats, SeriesTable, WindowSpec};
use crate::error::{Error, Result};
use crate::model::{forward, ImputationWindow, ModelConfig, ModelParams, ScalingSchedule, ScheduleVariant, Topology};
use crate::optim::{holdout_tail, train, EarlyStopPolicy, TrainConfig};

use super::metrics::MetricPair;
use super::report::{CellResult, DatasetInfo, EvalReport};

/// A benchmark column. The two single-stream columns are read from the full
/// model's local heads rather than trained separately.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelVariant {
    Seq2SeqImp,
    RnnFw,
    RnnBw,
    /// Forward encoder and forward decoder only.
    Seq2Seq,
    /// Full model with both streams weighted 0.5 at every step.
    Seq2SeqImpNoScale,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 5] = [
        ModelVariant::Seq2SeqImp,
        ModelVariant::RnnFw,
        ModelVariant::RnnBw,
        ModelVariant::Seq2Seq,
        ModelVariant::Seq2SeqImpNoScale,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelVariant::Seq2SeqImp => "seq2seqImp",
            ModelVariant::RnnFw => "RNN_FW",
            ModelVariant::RnnBw => "RNN_BW",
            ModelVariant::Seq2Seq => "seq2seq",
            ModelVariant::Seq2SeqImpNoScale => "seq2seqImp-noscale",
        }
    }

    fn recipe(self) -> Recipe {
        match self {
            ModelVariant::Seq2SeqImp | ModelVariant::RnnFw | ModelVariant::RnnBw => Recipe::Full,
            ModelVariant::Seq2Seq => Recipe::ForwardOnly,
            ModelVariant::Seq2SeqImpNoScale => Recipe::NoScale,
        }
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelVariant::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<&str> = ModelVariant::ALL.iter().map(|v| v.as_str()).collect();
                Error::invalid(format!(
                    "unknown model variant {s:?} (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

/// Distinct trained models behind the variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Recipe {
    Full,
    NoScale,
    ForwardOnly,
}

impl Recipe {
    fn model_config(self, base: &ModelConfig) -> ModelConfig {
        let mut c = *base;
        c.input_dim = 1;
        match self {
            Recipe::Full => c.topology = Topology::Bidirectional,
            Recipe::NoScale => {
                c.topology = Topology::Bidirectional;
                c.schedule = ScheduleVariant::Flat;
            }
            Recipe::ForwardOnly => c.topology = Topology::ForwardOnly,
        }
        c
    }
}

/// One univariate series of a benchmark dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchDataset {
    pub name: String,
    pub variable: String,
    pub values: Vec<f64>,
    pub missing: Vec<bool>,
}

impl BenchDataset {
    pub fn new(name: impl Into<String>, variable: impl Into<String>, values: Vec<f64>) -> Self {
        let missing = values.iter().map(|v| !v.is_finite()).collect();
        BenchDataset {
            name: name.into(),
            variable: variable.into(),
            values,
            missing,
        }
    }

    /// Splits a table into one dataset per column, labelled by column name.
    pub fn from_table(name: &str, table: &SeriesTable) -> Vec<BenchDataset> {
        (0..table.n_cols())
            .map(|c| BenchDataset {
                name: name.to_string(),
                variable: table.names()[c].clone(),
                values: table.column(c).to_vec(),
                missing: table.missing_mask(c).to_vec(),
            })
            .collect()
    }

    fn table(&self) -> Result<SeriesTable> {
        SeriesTable::new(
            vec![self.variable.clone()],
            vec![self.values.clone()],
            vec![self.missing.clone()],
        )
    }

    fn range(&self) -> (f64, f64) {
        self.values
            .iter()
            .zip(&self.missing)
            .filter(|(_, &m)| !m)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&v, _)| {
                (lo.min(v), hi.max(v))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    /// `input_dim` and `topology` are overridden per variant.
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub patience: usize,
    pub min_delta: f64,
    /// Training windows; `stride` applies to training only.
    pub window: WindowSpec,
    /// Stride between test windows; `None` uses the gap length.
    pub eval_stride: Option<usize>,
    pub test_fraction: f64,
    /// Tail fraction of the training windows held out for early stopping.
    pub val_fraction: f64,
    /// Concurrent (dataset, model) training jobs.
    pub jobs: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            patience: 10,
            min_delta: 0.0,
            window: WindowSpec::default(),
            eval_stride: None,
            test_fraction: 0.8,
            val_fraction: 0.1,
            jobs: 1,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        self.window.validate()?;
        EarlyStopPolicy::new(self.patience, self.min_delta)?;
        if self.eval_stride == Some(0) {
            return Err(Error::invalid("eval stride must be >= 1"));
        }
        if self.jobs == 0 {
            return Err(Error::invalid("jobs must be >= 1"));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "validation fraction must lie in (0, 1), got {}",
                self.val_fraction
            )));
        }
        crate::data::split_rows(100, self.test_fraction).map(|_| ())
    }

    fn test_spec(&self) -> WindowSpec {
        self.window.with_stride(self.eval_stride.unwrap_or(self.window.gap))
    }
}

struct Prepared {
    norm: NormStats,
    train: Vec<ImputationWindow>,
    val: Vec<ImputationWindow>,
    test: Vec<ImputationWindow>,
}

fn prepare(ds: &BenchDataset, cfg: &BenchConfig) -> Result<Prepared> {
    let table = ds.table()?;
    let (train_rows, test_rows) = split_train_test(&table, cfg.test_fraction)?;
    let norm = NormStats::from_table(&train_rows)?;
    let windows = extract_windows(&norm.normalize(&train_rows)?, &cfg.window)?;
    let (train, val) = holdout_tail(windows, cfg.val_fraction)?;
    let test = extract_windows(&norm.normalize(&test_rows)?, &cfg.test_spec())?;
    if test.is_empty() {
        return Err(Error::invalid(format!(
            "{} test rows hold no complete test window",
            test_rows.n_rows()
        )));
    }
    Ok(Prepared { norm, train, val, test })
}

/// Pooled denormalized points of one trained model on the test windows.
struct Predictions {
    truth: Vec<f64>,
    merged: Vec<f64>,
    fw: Vec<f64>,
    bw: Vec<f64>,
}

fn fit_and_predict(data: &Prepared, recipe: Recipe, cfg: &BenchConfig) -> Result<Predictions> {
    let model_cfg = recipe.model_config(&cfg.model);
    let policy = EarlyStopPolicy::new(cfg.patience, cfg.min_delta)?;
    let (params, log) = train(model_cfg, &data.train, &data.val, policy, &cfg.train)?;
    log::info!(
        "{recipe:?}: best epoch {} of {}, val loss {:.4e}",
        log.best_epoch,
        log.records.len() - 1,
        log.best_val_loss
    );
    predict(&params, data)
}

fn predict(params: &ModelParams, data: &Prepared) -> Result<Predictions> {
    let mut out = Predictions {
        truth: Vec::new(),
        merged: Vec::new(),
        fw: Vec::new(),
        bw: Vec::new(),
    };
    let de = |v: &crate::numerics::Vector| data.norm.denormalize_value(0, v[0]);
    for w in &data.test {
        let schedule = ScalingSchedule::new(w.gap_len(), params.config().schedule)?;
        let trace = forward(params, w, &schedule)?;
        out.truth.extend(w.missing.iter().map(de));
        out.merged.extend(trace.merged.iter().map(de));
        out.fw.extend(trace.pred_fw.iter().map(de));
        out.bw.extend(trace.pred_bw.iter().map(de));
    }
    Ok(out)
}

fn score(pred: &Predictions, variant: ModelVariant) -> Result<MetricPair> {
    let p = match variant {
        ModelVariant::RnnFw => &pred.fw,
        ModelVariant::RnnBw => &pred.bw,
        _ => &pred.merged,
    };
    if let Some(i) = p.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("prediction {i} is {}", p[i])));
    }
    MetricPair::compute(&pred.truth, p)
}

/// Trains the models behind `variants` on every dataset and scores them on
/// the test windows. Failures are recorded per cell; the grid is always full.
pub fn run_benchmark(datasets: &[BenchDataset], variants: &[ModelVariant], cfg: &BenchConfig) -> Result<EvalReport> {
    cfg.validate()?;
    if variants.is_empty() {
        return Err(Error::invalid("no model variants requested"));
    }
    let mut recipes: Vec<Recipe> = Vec::new();
    for v in variants {
        if !recipes.contains(&v.recipe()) {
            recipes.push(v.recipe());
        }
    }

    let prepared: Vec<Result<Prepared>> = datasets.iter().map(|d| prepare(d, cfg)).collect();
    let jobs: Vec<(usize, Recipe)> = (0..datasets.len())
        .filter(|&d| prepared[d].is_ok())
        .flat_map(|d| recipes.iter().map(move |&r| (d, r)))
        .collect();
    let run = |&(d, r): &(usize, Recipe)| {
        let data = prepared[d].as_ref().expect("filtered");
        log::info!("training {:?} on {}:{}", r, datasets[d].name, datasets[d].variable);
        fit_and_predict(data, r, cfg)
    };
    let results: Vec<Result<Predictions>> = if cfg.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
        pool.install(|| jobs.par_iter().map(run).collect())
    } else {
        jobs.iter().map(run).collect()
    };

    let mut infos = Vec::with_capacity(datasets.len());
    let mut cells = Vec::with_capacity(datasets.len());
    for (d, ds) in datasets.iter().enumerate() {
        infos.push(DatasetInfo {
            name: ds.name.clone(),
            variable: ds.variable.clone(),
            range: ds.range(),
            test_windows: prepared[d].as_ref().map_or(0, |p| p.test.len()),
        });
        let row = variants
            .iter()
            .map(|&v| {
                let outcome = match &prepared[d] {
                    Err(e) => Err(format!("data: {e}")),
                    Ok(_) => {
                        let k = jobs
                            .iter()
                            .position(|&(jd, r)| jd == d && r == v.recipe())
                            .expect("job exists");
                        match &results[k] {
                            Err(e) => Err(e.to_string()),
                            Ok(pred) => score(pred, v).map(|m| (m, pred.truth.len())).map_err(|e| e.to_string()),
                        }
                    }
                };
                match outcome {
                    Ok((m, points)) => CellResult { metrics: Ok(m), points },
                    Err(msg) => {
                        log::warn!("{}:{} {v}: {msg}", ds.name, ds.variable);
                        CellResult {
                            metrics: Err(msg),
                            points: 0,
                        }
                    }
                }
            })
            .collect();
        cells.push(row);
    }
    Ok(EvalReport {
        variants: variants.to_vec(),
        datasets: infos,
        cells,
    })
}
