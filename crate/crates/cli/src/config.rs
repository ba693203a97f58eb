use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use seqimp::data::{ColumnRef, CsvOptions, HeaderMode, WindowSpec};
use seqimp::eval::{BenchConfig, ModelVariant};
use seqimp::model::{ModelConfig, ScheduleVariant, Topology};
use seqimp::optim::{AdamConfig, TrainConfig};

/// Run configuration as read from TOML. Relative paths are resolved against
/// the directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[derive(Default)]
pub struct RunConfig {
    pub model: ModelSection,
    pub training: TrainingSection,
    pub data: DataSection,
    pub output: OutputSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval: Option<EvalSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    /// Must equal the number of selected columns when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_dim: Option<usize>,
    pub hidden_dim: usize,
    pub schedule: String,
    pub merge_mlp: bool,
    /// Hidden width of the merge MLP; defaults to `hidden_dim`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub merge_hidden: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSection {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub min_delta: f64,
    pub seed: u64,
    pub val_fraction: f64,
    pub threads: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clip_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Column names or zero-based indices; empty selects all.
    pub columns: Vec<String>,
    pub header: String,
    pub missing_markers: Vec<String>,
    pub test_fraction: f64,
    pub before: usize,
    pub gap: usize,
    pub after: usize,
    pub stride: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval_stride: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub variants: Vec<String>,
    pub jobs: usize,
    pub datasets: Vec<DatasetEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub name: String,
    pub path: PathBuf,
    #[serde(default)]
    pub columns: Vec<String>,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            input_dim: None,
            hidden_dim: 64,
            schedule: ScheduleVariant::PaperEq1.as_str().into(),
            merge_mlp: false,
            merge_hidden: None,
        }
    }
}

impl Default for TrainingSection {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainingSection {
            lr: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.eps,
            epochs: 100,
            batch_size: 32,
            patience: 10,
            min_delta: 0.0,
            seed: 0,
            val_fraction: 0.1,
            threads: 1,
            clip_norm: None,
        }
    }
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            path: None,
            columns: Vec::new(),
            header: "auto".into(),
            missing_markers: vec!["NA".into(), String::new()],
            test_fraction: 0.8,
            before: 10,
            gap: 10,
            after: 10,
            stride: 1,
            eval_stride: None,
        }
    }
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("out"),
        }
    }
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            variants: [
                ModelVariant::Seq2SeqImp,
                ModelVariant::RnnFw,
                ModelVariant::RnnBw,
                ModelVariant::Seq2Seq,
            ]
            .iter()
            .map(|v| v.to_string())
            .collect(),
            jobs: 1,
            datasets: Vec::new(),
        }
    }
}

/// Annotated defaults printed by `--print-defaults`.
pub const DEFAULTS_TOML: &str = r#"# seqimp run configuration. Every key is optional; unknown keys are errors.
# Relative paths are resolved against this file's directory.

[model]
# input_dim = 1          # checked against the number of selected columns
hidden_dim = 64
schedule = "paper-eq1"   # paper-eq1 | endpoint | flat
merge_mlp = false        # tanh hidden layer before the merged output
# merge_hidden = 64      # merge MLP width, defaults to hidden_dim

[training]
lr = 0.001
beta1 = 0.9
beta2 = 0.999
epsilon = 1e-8
epochs = 100
batch_size = 32
patience = 10            # epochs without validation improvement before stopping
min_delta = 0.0
seed = 0
val_fraction = 0.1       # last share of training windows used for early stopping
threads = 1
# clip_norm = 5.0

[data]
# path = "series.csv"
columns = []             # names or zero-based indices; empty selects all
header = "auto"          # auto | present | absent
missing_markers = ["NA", ""]
# The chronologically last test_fraction of rows is held out for testing.
# 0.8 keeps only the first 20% for training; 0.2 is the more common choice.
test_fraction = 0.8
before = 10
gap = 10
after = 10
stride = 1               # training windows
# eval_stride = 10       # test windows, defaults to gap

[output]
dir = "out"

# [eval]
# variants = ["seq2seqImp", "RNN_FW", "RNN_BW", "seq2seq"]   # also seq2seqImp-noscale
# jobs = 1
# [[eval.datasets]]
# name = "sine"
# path = "sine.csv"
# columns = []
"#;

fn field<T>(path: &str, r: seqimp::Result<T>) -> Result<T> {
    r.with_context(|| format!("invalid config value at {path}"))
}

fn parse_header(s: &str) -> Result<HeaderMode> {
    Ok(match s {
        "auto" => HeaderMode::Auto,
        "present" => HeaderMode::Present,
        "absent" => HeaderMode::Absent,
        other => bail!("invalid config value at data.header: {other:?} (expected auto, present or absent)"),
    })
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Reads and validates a config file, resolving relative paths.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg = Self::from_toml(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = &mut self.data.path {
            fix(p);
        }
        fix(&mut self.output.dir);
        if let Some(e) = &mut self.eval {
            for d in &mut e.datasets {
                fix(&mut d.path);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model_config(self.model.input_dim.unwrap_or(1))?;
        field("training", self.train_config().validate())?;
        if self.training.epochs == 0 {
            bail!("invalid config value at training.epochs: must be >= 1");
        }
        field(
            "training.patience",
            seqimp::optim::EarlyStopPolicy::new(self.training.patience, self.training.min_delta).map(|_| ()),
        )?;
        if !(self.training.val_fraction > 0.0 && self.training.val_fraction < 1.0) {
            bail!("invalid config value at training.val_fraction: must lie in (0, 1)");
        }
        self.csv_options()?;
        field("data", self.window_spec().and_then(|w| w.validate()))?;
        if self.data.eval_stride == Some(0) {
            bail!("invalid config value at data.eval_stride: must be >= 1");
        }
        field(
            "data.test_fraction",
            seqimp::data::split_rows(100, self.data.test_fraction).map(|_| ()),
        )?;
        if let Some(e) = &self.eval {
            self.variants()?;
            if e.jobs == 0 {
                bail!("invalid config value at eval.jobs: must be >= 1");
            }
        }
        Ok(())
    }

    pub fn schedule(&self) -> Result<ScheduleVariant> {
        field("model.schedule", self.model.schedule.parse())
    }

    pub fn model_config(&self, input_dim: usize) -> Result<ModelConfig> {
        if let Some(d) = self.model.input_dim {
            if d != input_dim {
                bail!("invalid config value at model.input_dim: {d}, but the data has {input_dim} columns");
            }
        }
        let cfg = ModelConfig {
            input_dim,
            hidden_dim: self.model.hidden_dim,
            schedule: self.schedule()?,
            merge_hidden: self
                .model
                .merge_mlp
                .then(|| self.model.merge_hidden.unwrap_or(self.model.hidden_dim)),
            topology: Topology::Bidirectional,
        };
        field("model", cfg.validate())?;
        Ok(cfg)
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.training;
        TrainConfig {
            adam: AdamConfig {
                lr: t.lr,
                beta1: t.beta1,
                beta2: t.beta2,
                eps: t.epsilon,
            },
            epochs: t.epochs,
            batch_size: t.batch_size,
            seed: t.seed,
            clip_norm: t.clip_norm,
            threads: t.threads,
        }
    }

    pub fn csv_options(&self) -> Result<CsvOptions> {
        Ok(CsvOptions {
            columns: self.data.columns.iter().map(|c| ColumnRef::parse(c)).collect(),
            header: parse_header(&self.data.header)?,
            missing_markers: self.data.missing_markers.clone(),
        })
    }

    pub fn window_spec(&self) -> seqimp::Result<WindowSpec> {
        WindowSpec::new(self.data.before, self.data.gap, self.data.after, self.data.stride)
    }

    pub fn variants(&self) -> Result<Vec<ModelVariant>> {
        let names = self.eval.clone().unwrap_or_default().variants;
        if names.is_empty() {
            bail!("invalid config value at eval.variants: empty");
        }
        names.iter().map(|n| field("eval.variants", n.parse())).collect()
    }

    pub fn bench_config(&self) -> Result<BenchConfig> {
        Ok(BenchConfig {
            model: self.model_config(self.model.input_dim.unwrap_or(1))?,
            train: self.train_config(),
            patience: self.training.patience,
            min_delta: self.training.min_delta,
            window: self.window_spec()?,
            eval_stride: self.data.eval_stride,
            test_fraction: self.data.test_fraction,
            val_fraction: self.training.val_fraction,
            jobs: self.eval.as_ref().map_or(1, |e| e.jobs),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn printed_defaults_parse_to_defaults() {
        let cfg = RunConfig::from_toml(DEFAULTS_TOML).unwrap();
        assert_eq!(cfg, RunConfig::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_path() {
        let err = RunConfig::from_toml("[model]\nhiden_dim = 3\n").unwrap_err();
        let msg = format!("{err:#}");
        assert!(msg.contains("hiden_dim"), "{msg}");
    }

    #[test]
    fn invalid_values_name_the_field() {
        let cfg = RunConfig::from_toml("[training]\nlr = -1.0\n").unwrap();
        assert!(format!("{:#}", cfg.validate().unwrap_err()).contains("training"));
        let cfg = RunConfig::from_toml("[model]\nschedule = \"cubic\"\n").unwrap();
        assert!(format!("{:#}", cfg.validate().unwrap_err()).contains("model.schedule"));
        let cfg = RunConfig::from_toml("[data]\nheader = \"maybe\"\n").unwrap();
        assert!(format!("{:#}", cfg.validate().unwrap_err()).contains("data.header"));
        let cfg = RunConfig::from_toml("[eval]\nvariants = [\"brits\"]\n").unwrap();
        assert!(format!("{:#}", cfg.validate().unwrap_err()).contains("eval.variants"));
    }

    #[test]
    fn input_dim_must_match_the_data() {
        let cfg = RunConfig::from_toml("[model]\ninput_dim = 2\n").unwrap();
        assert!(cfg.model_config(2).is_ok());
        assert!(cfg.model_config(1).is_err());
    }

    #[test]
    fn merge_mlp_width_defaults_to_hidden() {
        let cfg = RunConfig::from_toml("[model]\nhidden_dim = 8\nmerge_mlp = true\n").unwrap();
        assert_eq!(cfg.model_config(1).unwrap().merge_hidden, Some(8));
    }
}
