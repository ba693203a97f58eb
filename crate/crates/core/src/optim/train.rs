use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fmt::Write;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{backward, window_loss, ImputationWindow, ModelConfig, ModelParams, ScalingSchedule};
use crate::numerics::Rng;

use super::adam::{AdamConfig, AdamState};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Global gradient-norm threshold; `None` disables clipping.
    pub clip_norm: Option<f64>,
    /// Worker threads for per-window gradients; 1 runs inline.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            adam: AdamConfig::default(),
            epochs: 100,
            batch_size: 32,
            seed: 0,
            clip_norm: None,
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.adam.validate()?;
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be >= 1"));
        }
        if self.threads == 0 {
            return Err(Error::invalid("threads must be >= 1"));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::invalid(format!("clip norm must be > 0, got {c}")));
            }
        }
        Ok(())
    }
}

/// Stops after `patience` consecutive epochs without a validation loss
/// below `best - min_delta`, and remembers the best parameters seen.
#[derive(Debug, Clone)]
pub struct EarlyStopPolicy {
    patience: usize,
    min_delta: f64,
    best_loss: f64,
    best_epoch: usize,
    best_params: Option<ModelParams>,
    stale_epochs: usize,
}

impl EarlyStopPolicy {
    pub fn new(patience: usize, min_delta: f64) -> Result<Self> {
        if patience == 0 {
            return Err(Error::invalid("patience must be >= 1"));
        }
        if min_delta.is_nan() || min_delta < 0.0 {
            return Err(Error::invalid(format!("min_delta must be >= 0, got {min_delta}")));
        }
        Ok(EarlyStopPolicy {
            patience,
            min_delta,
            best_loss: f64::INFINITY,
            best_epoch: 0,
            best_params: None,
            stale_epochs: 0,
        })
    }

    /// Records an epoch's validation loss; returns true when training should stop.
    pub fn observe(&mut self, epoch: usize, val_loss: f64, params: &ModelParams) -> bool {
        if self.best_params.is_none() || val_loss < self.best_loss - self.min_delta {
            self.best_loss = val_loss;
            self.best_epoch = epoch;
            self.best_params = Some(params.clone());
            self.stale_epochs = 0;
            false
        } else {
            self.stale_epochs += 1;
            self.stale_epochs >= self.patience
        }
    }

    pub fn best_loss(&self) -> f64 {
        self.best_loss
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_params(&self) -> Option<&ModelParams> {
        self.best_params.as_ref()
    }
}

impl Default for EarlyStopPolicy {
    fn default() -> Self {
        EarlyStopPolicy::new(10, 0.0).expect("valid defaults")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean batch loss over the epoch; `NaN` for the pre-training row.
    pub train_loss: f64,
    pub val_loss: f64,
    pub elapsed_secs: f64,
    pub clipped_batches: usize,
}

#[derive(Debug, Clone, Default)]
pub struct TrainLog {
    /// Row 0 is the untrained model's validation loss.
    pub records: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

impl TrainLog {
    pub fn initial_val_loss(&self) -> f64 {
        self.records.first().map_or(f64::NAN, |r| r.val_loss)
    }

    pub fn final_val_loss(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.val_loss)
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>6}  {:>14}  {:>14}  {:>10}  {:>7}",
            "epoch", "train_loss", "val_loss", "elapsed_s", "clipped"
        );
        for r in &self.records {
            let marker = if r.epoch == self.best_epoch { " *" } else { "" };
            let _ = writeln!(
                s,
                "{:>6}  {:>14.6e}  {:>14.6e}  {:>10.3}  {:>7}{marker}",
                r.epoch, r.train_loss, r.val_loss, r.elapsed_secs, r.clipped_batches
            );
        }
        let _ = writeln!(
            s,
            "best epoch {} (val_loss {:.6e}){}",
            self.best_epoch,
            self.best_val_loss,
            if self.stopped_early { ", stopped early" } else { "" }
        );
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss,elapsed\n");
        for r in &self.records {
            let _ = writeln!(s, "{},{},{},{:.6}", r.epoch, r.train_loss, r.val_loss, r.elapsed_secs);
        }
        s
    }
}

/// Splits off the chronologically last `fraction` of windows (at least one)
/// for validation.
pub fn holdout_tail(
    windows: Vec<ImputationWindow>,
    fraction: f64,
) -> Result<(Vec<ImputationWindow>, Vec<ImputationWindow>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!(
            "validation fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let n = windows.len();
    let val = ((fraction * n as f64).ceil() as usize).max(1);
    if n < 2 || val >= n {
        return Err(Error::invalid(format!(
            "{n} windows are too few for a validation split"
        )));
    }
    let mut train = windows;
    let val_set = train.split_off(n - val);
    Ok((train, val_set))
}

struct Schedules {
    variant: crate::model::ScheduleVariant,
    cache: HashMap<usize, ScalingSchedule>,
}

impl Schedules {
    fn new(params: &ModelParams, windows: &[&[ImputationWindow]]) -> Result<Self> {
        let variant = params.config().schedule;
        let mut cache = HashMap::new();
        for w in windows.iter().flat_map(|s| s.iter()) {
            if let Entry::Vacant(e) = cache.entry(w.gap_len()) {
                e.insert(ScalingSchedule::new(w.gap_len(), variant)?);
            }
        }
        Ok(Schedules { variant, cache })
    }

    fn get(&self, gap: usize) -> &ScalingSchedule {
        &self.cache[&gap]
    }
}

fn run_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads <= 1 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Mean composite loss over `windows`. Summation is in window order.
pub fn mean_loss(params: &ModelParams, windows: &[ImputationWindow]) -> Result<f64> {
    if windows.is_empty() {
        return Err(Error::invalid("mean loss over an empty window set"));
    }
    let schedules = Schedules::new(params, &[windows])?;
    mean_loss_with(params, windows, &schedules, false)
}

fn mean_loss_with(
    params: &ModelParams,
    windows: &[ImputationWindow],
    schedules: &Schedules,
    parallel: bool,
) -> Result<f64> {
    let losses: Vec<Result<f64>> = if parallel {
        windows
            .par_iter()
            .map(|w| window_loss(params, w, schedules.get(w.gap_len())))
            .collect()
    } else {
        windows
            .iter()
            .map(|w| window_loss(params, w, schedules.get(w.gap_len())))
            .collect()
    };
    let mut sum = 0.0;
    for l in losses {
        sum += l?;
    }
    Ok(sum / windows.len() as f64)
}

/// Mean loss and mean gradient over one batch, reduced in batch order so the
/// result does not depend on the worker count.
fn batch_gradient(
    params: &ModelParams,
    batch: &[&ImputationWindow],
    schedules: &Schedules,
    parallel: bool,
) -> Result<(f64, ModelParams)> {
    let one = |w: &&ImputationWindow| backward(params, w, schedules.get(w.gap_len()));
    let results: Vec<_> = if parallel {
        batch.par_iter().map(one).collect()
    } else {
        batch.iter().map(one).collect()
    };
    let mut total = params.zeros_like();
    let mut loss = 0.0;
    for r in results {
        let (l, g) = r?;
        loss += l;
        total.add_scaled(&g.params, 1.0)?;
    }
    let scale = 1.0 / batch.len() as f64;
    total.scale(scale);
    Ok((loss * scale, total))
}

/// Initializes a model from `config` with the run seed, then trains it.
pub fn train(
    config: ModelConfig,
    train_windows: &[ImputationWindow],
    val_windows: &[ImputationWindow],
    policy: EarlyStopPolicy,
    cfg: &TrainConfig,
) -> Result<(ModelParams, TrainLog)> {
    let mut rng = Rng::new(cfg.seed);
    let params = ModelParams::init(config, &mut rng)?;
    train_from(params, train_windows, val_windows, policy, cfg, &mut rng)
}

/// Mini-batch Adam on the composite loss with per-epoch validation and early
/// stopping. Returns the best-validation parameters.
pub fn train_from(
    mut params: ModelParams,
    train_windows: &[ImputationWindow],
    val_windows: &[ImputationWindow],
    mut policy: EarlyStopPolicy,
    cfg: &TrainConfig,
    rng: &mut Rng,
) -> Result<(ModelParams, TrainLog)> {
    cfg.validate()?;
    if train_windows.is_empty() || val_windows.is_empty() {
        return Err(Error::invalid(format!(
            "training needs non-empty train and validation sets (got {} / {})",
            train_windows.len(),
            val_windows.len()
        )));
    }
    for w in train_windows.iter().chain(val_windows) {
        if w.dim() != params.input_dim() {
            return Err(Error::shape("training window dimension", params.input_dim(), w.dim()));
        }
    }
    let schedules = Schedules::new(&params, &[train_windows, val_windows])?;
    log::debug!("training with {} schedule", schedules.variant);
    let parallel = cfg.threads > 1;
    let start = Instant::now();
    let mut adam = AdamState::new(cfg.adam, &params)?;
    let mut log = TrainLog::default();

    let initial = run_pool(cfg.threads, || {
        mean_loss_with(&params, val_windows, &schedules, parallel)
    })??;
    if !initial.is_finite() {
        return Err(Error::Diverged {
            epoch: 0,
            batch: 0,
            reason: "initial validation loss is not finite".into(),
        });
    }
    policy.observe(0, initial, &params);
    log.records.push(EpochRecord {
        epoch: 0,
        train_loss: f64::NAN,
        val_loss: initial,
        elapsed_secs: start.elapsed().as_secs_f64(),
        clipped_batches: 0,
    });

    let mut order: Vec<usize> = (0..train_windows.len()).collect();
    for epoch in 1..=cfg.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        let mut clipped = 0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&ImputationWindow> = chunk.iter().map(|&i| &train_windows[i]).collect();
            let (loss, mut grad) = run_pool(cfg.threads, || batch_gradient(&params, &batch, &schedules, parallel))??;
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: b,
                    reason: format!("batch loss {loss}"),
                });
            }
            if let Some(limit) = cfg.clip_norm {
                let norm = grad.l2_norm();
                if norm > limit {
                    grad.scale(limit / norm);
                    clipped += 1;
                    log::info!("epoch {epoch} batch {b}: clipped gradient norm {norm:.4e} to {limit:.4e}");
                }
            }
            adam.step(&mut params, &grad).map_err(|e| Error::Diverged {
                epoch,
                batch: b,
                reason: e.to_string(),
            })?;
            epoch_loss += loss;
            batches += 1;
        }
        let val = run_pool(cfg.threads, || {
            mean_loss_with(&params, val_windows, &schedules, parallel)
        })??;
        if !val.is_finite() {
            return Err(Error::Diverged {
                epoch,
                batch: batches,
                reason: format!("validation loss {val}"),
            });
        }
        log.records.push(EpochRecord {
            epoch,
            train_loss: epoch_loss / batches as f64,
            val_loss: val,
            elapsed_secs: start.elapsed().as_secs_f64(),
            clipped_batches: clipped,
        });
        log::debug!("epoch {epoch}: train {:.6e} val {val:.6e}", epoch_loss / batches as f64);
        if policy.observe(epoch, val, &params) {
            log.stopped_early = true;
            break;
        }
    }

    log.best_epoch = policy.best_epoch();
    log.best_val_loss = policy.best_loss();
    let best = policy.best_params().cloned().unwrap_or(params);
    Ok((best, log))
}
