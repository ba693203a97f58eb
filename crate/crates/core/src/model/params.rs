use std::fmt;

use crate::error::{Error, Result};
use crate::lstm::LstmParams;
use crate::numerics::{Matrix, Rng, Vector};

use super::schedule::ScheduleVariant;

/// `y = W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub weight: Matrix,
    pub bias: Vector,
}

impl Affine {
    pub fn zeros(input: usize, output: usize) -> Self {
        Affine {
            weight: Matrix::zeros(output, input),
            bias: Vector::zeros(output),
        }
    }

    /// Weights ~ U(-k, k), `k = 1/sqrt(input)`; zero bias.
    pub fn init(input: usize, output: usize, rng: &mut Rng) -> Self {
        let k = 1.0 / (input as f64).sqrt();
        Affine {
            weight: Matrix::uniform(output, input, k, rng),
            bias: Vector::zeros(output),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    pub(crate) fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.bias.as_slice().to_vec();
        self.weight.matvec_acc(x, &mut y);
        y
    }

    /// Accumulates parameter gradients and returns `dL/dx`.
    pub(crate) fn backward(&self, x: &[f64], dy: &[f64], grads: &mut Affine) -> Vec<f64> {
        grads.weight.add_outer(dy, x);
        for (g, d) in grads.bias.as_mut_slice().iter_mut().zip(dy) {
            *g += d;
        }
        let mut dx = vec![0.0; self.input_dim()];
        self.weight.matvec_t_acc(dy, &mut dx);
        dx
    }

    fn tensors<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a [f64])>) {
        out.push((format!("{prefix}.weight"), self.weight.as_slice()));
        out.push((format!("{prefix}.bias"), self.bias.as_slice()));
    }

    fn tensors_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut [f64])>) {
        out.push((format!("{prefix}.weight"), self.weight.as_mut_slice()));
        out.push((format!("{prefix}.bias"), self.bias.as_mut_slice()));
    }
}

/// Output layer over the concatenated, scaled decoder hidden vectors.
#[derive(Debug, Clone, PartialEq)]
pub enum MergeLayer {
    Linear(Affine),
    /// One tanh hidden layer followed by a linear output.
    Mlp {
        hidden: Affine,
        out: Affine,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Topology {
    /// Both encoders and both decoder streams.
    #[default]
    Bidirectional,
    /// Forward encoder and forward decoder only; the plain seq2seq baseline.
    ForwardOnly,
}

impl Topology {
    pub(crate) fn code(self) -> u8 {
        match self {
            Topology::Bidirectional => 0,
            Topology::ForwardOnly => 1,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Topology::Bidirectional),
            1 => Some(Topology::ForwardOnly),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub schedule: ScheduleVariant,
    /// Width of the tanh hidden layer in the merge MLP; `None` for a single
    /// affine merge.
    pub merge_hidden: Option<usize>,
    pub topology: Topology,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input_dim: 1,
            hidden_dim: 64,
            schedule: ScheduleVariant::PaperEq1,
            merge_hidden: None,
            topology: Topology::Bidirectional,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::invalid("model dimensions must be >= 1"));
        }
        if self.merge_hidden == Some(0) {
            return Err(Error::invalid("merge MLP width must be >= 1"));
        }
        Ok(())
    }
}

/// Every trainable tensor of the imputation network.
///
/// The same type holds gradients. `tensors()` fixes the canonical order used
/// for initialization, optimizer state, finite-difference checks and
/// checkpoints: `enc_fw`, `enc_bw`, `dec_fw`, `dec_bw` (each `w`, `u`, `b`),
/// `head_fw`, `head_bw`, then the merge layer (`hidden` before `out` for the
/// MLP form).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    config: ModelConfig,
    pub enc_fw: LstmParams,
    pub enc_bw: LstmParams,
    pub dec_fw: LstmParams,
    pub dec_bw: LstmParams,
    pub head_fw: Affine,
    pub head_bw: Affine,
    pub merge: MergeLayer,
}

impl ModelParams {
    pub fn init(config: ModelConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let (d, h) = (config.input_dim, config.hidden_dim);
        let enc_fw = LstmParams::init(d, h, rng);
        let enc_bw = LstmParams::init(d, h, rng);
        let dec_fw = LstmParams::init(d, h, rng);
        let dec_bw = LstmParams::init(d, h, rng);
        let head_fw = Affine::init(h, d, rng);
        let head_bw = Affine::init(h, d, rng);
        let merge = match config.merge_hidden {
            None => MergeLayer::Linear(Affine::init(2 * h, d, rng)),
            Some(m) => {
                let hidden = Affine::init(2 * h, m, rng);
                let out = Affine::init(m, d, rng);
                MergeLayer::Mlp { hidden, out }
            }
        };
        Ok(ModelParams {
            config,
            enc_fw,
            enc_bw,
            dec_fw,
            dec_bw,
            head_fw,
            head_bw,
            merge,
        })
    }

    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let (d, h) = (config.input_dim, config.hidden_dim);
        let merge = match config.merge_hidden {
            None => MergeLayer::Linear(Affine::zeros(2 * h, d)),
            Some(m) => MergeLayer::Mlp {
                hidden: Affine::zeros(2 * h, m),
                out: Affine::zeros(m, d),
            },
        };
        Ok(ModelParams {
            config,
            enc_fw: LstmParams::zeros(d, h),
            enc_bw: LstmParams::zeros(d, h),
            dec_fw: LstmParams::zeros(d, h),
            dec_bw: LstmParams::zeros(d, h),
            head_fw: Affine::zeros(h, d),
            head_bw: Affine::zeros(h, d),
            merge,
        })
    }

    pub fn zeros_like(&self) -> Self {
        ModelParams::zeros(self.config).expect("config was validated at construction")
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.config.hidden_dim
    }

    pub fn topology(&self) -> Topology {
        self.config.topology
    }

    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::with_capacity(20);
        for (name, lstm) in [
            ("enc_fw", &self.enc_fw),
            ("enc_bw", &self.enc_bw),
            ("dec_fw", &self.dec_fw),
            ("dec_bw", &self.dec_bw),
        ] {
            for (t, data) in lstm.tensors() {
                out.push((format!("{name}.{t}"), data));
            }
        }
        self.head_fw.tensors("head_fw", &mut out);
        self.head_bw.tensors("head_bw", &mut out);
        match &self.merge {
            MergeLayer::Linear(a) => a.tensors("merge", &mut out),
            MergeLayer::Mlp { hidden, out: o } => {
                hidden.tensors("merge.hidden", &mut out);
                o.tensors("merge.out", &mut out);
            }
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out = Vec::with_capacity(20);
        for (name, lstm) in [
            ("enc_fw", &mut self.enc_fw),
            ("enc_bw", &mut self.enc_bw),
            ("dec_fw", &mut self.dec_fw),
            ("dec_bw", &mut self.dec_bw),
        ] {
            for (t, data) in lstm.tensors_mut() {
                out.push((format!("{name}.{t}"), data));
            }
        }
        self.head_fw.tensors_mut("head_fw", &mut out);
        self.head_bw.tensors_mut("head_bw", &mut out);
        match &mut self.merge {
            MergeLayer::Linear(a) => a.tensors_mut("merge", &mut out),
            MergeLayer::Mlp { hidden, out: o } => {
                hidden.tensors_mut("merge.hidden", &mut out);
                o.tensors_mut("merge.out", &mut out);
            }
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.num_params());
        for (_, t) in self.tensors() {
            flat.extend_from_slice(t);
        }
        flat
    }

    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        let n = self.num_params();
        if flat.len() != n {
            return Err(Error::shape("flat parameter vector", n, flat.len()));
        }
        let mut k = 0;
        for (_, t) in self.tensors_mut() {
            let len = t.len();
            t.copy_from_slice(&flat[k..k + len]);
            k += len;
        }
        Ok(())
    }

    /// Human-readable location of a flat index, e.g. `dec_fw.u[17]`.
    pub fn param_path(&self, mut index: usize) -> Option<String> {
        for (name, t) in self.tensors() {
            if index < t.len() {
                return Some(format!("{name}[{index}]"));
            }
            index -= t.len();
        }
        None
    }

    pub fn same_shape(&self, other: &ModelParams) -> bool {
        let a = self.tensors();
        let b = other.tensors();
        a.len() == b.len()
            && a.iter()
                .zip(&b)
                .all(|((na, ta), (nb, tb))| na == nb && ta.len() == tb.len())
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::shape(
                "parameter accumulation",
                "identical layouts",
                "different layouts",
            ));
        }
        for ((_, dst), (_, src)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, t) in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|(_, t)| t.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Path of the first non-finite entry, if any.
    pub fn first_non_finite(&self) -> Option<String> {
        for (name, t) in self.tensors() {
            if let Some(i) = t.iter().position(|v| !v.is_finite()) {
                return Some(format!("{name}[{i}]"));
            }
        }
        None
    }
}

impl fmt::Display for ModelConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "input_dim={} hidden_dim={} schedule={} merge={} topology={:?}",
            self.input_dim,
            self.hidden_dim,
            self.schedule,
            self.merge_hidden
                .map_or_else(|| "linear".to_string(), |m| format!("mlp({m})")),
            self.topology
        )
    }
}
