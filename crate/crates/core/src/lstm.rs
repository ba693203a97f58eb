//! Single-layer LSTM cell (forget gate, no peepholes) with an exact
//! reverse-mode pass through time.
//!
//! Gate parameters are stored stacked in the order input, forget,
//! cell-candidate, output: `w` is `4H x I`, `u` is `4H x H`, `b` is `4H`.
//! Rows `k*H..(k+1)*H` of each belong to gate `k`.
//!
//! ```text
//! i = σ(W_i x + U_i h + b_i)      f = σ(W_f x + U_f h + b_f)
//! g = tanh(W_g x + U_g h + b_g)   o = σ(W_o x + U_o h + b_o)
//! c' = f ⊙ c + i ⊙ g              h' = o ⊙ tanh(c')
//! ```

use crate::error::{Error, Result};
use crate::numerics::{sigmoid_scalar, Matrix, Rng, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Candidate = 2,
    Output = 3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    input_dim: usize,
    hidden_dim: usize,
    pub w: Matrix,
    pub u: Matrix,
    pub b: Vector,
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        LstmParams {
            input_dim,
            hidden_dim,
            w: Matrix::zeros(4 * hidden_dim, input_dim),
            u: Matrix::zeros(4 * hidden_dim, hidden_dim),
            b: Vector::zeros(4 * hidden_dim),
        }
    }

    /// Weights ~ U(-k, k) with `k = 1/sqrt(hidden_dim)`; forget-gate bias 1,
    /// other biases 0. Draw order: `w` then `u`, each row-major.
    pub fn init(input_dim: usize, hidden_dim: usize, rng: &mut Rng) -> Self {
        let k = 1.0 / (hidden_dim as f64).sqrt();
        let w = Matrix::uniform(4 * hidden_dim, input_dim, k, rng);
        let u = Matrix::uniform(4 * hidden_dim, hidden_dim, k, rng);
        let mut b = Vector::zeros(4 * hidden_dim);
        for j in 0..hidden_dim {
            b[Gate::Forget as usize * hidden_dim + j] = 1.0;
        }
        LstmParams {
            input_dim,
            hidden_dim,
            w,
            u,
            b,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    /// Bias slice of one gate.
    pub fn gate_bias_mut(&mut self, gate: Gate) -> &mut [f64] {
        let h = self.hidden_dim;
        let k = gate as usize;
        &mut self.b.as_mut_slice()[k * h..(k + 1) * h]
    }

    pub fn tensors(&self) -> [(&'static str, &[f64]); 3] {
        [
            ("w", self.w.as_slice()),
            ("u", self.u.as_slice()),
            ("b", self.b.as_slice()),
        ]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut [f64]); 3] {
        [
            ("w", self.w.as_mut_slice()),
            ("u", self.u.as_mut_slice()),
            ("b", self.b.as_mut_slice()),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vector,
    pub c: Vector,
}

impl LstmState {
    pub fn zeros(hidden_dim: usize) -> Self {
        LstmState {
            h: Vector::zeros(hidden_dim),
            c: Vector::zeros(hidden_dim),
        }
    }
}

/// Everything the backward pass needs from one forward step.
#[derive(Debug, Clone)]
pub struct CellTape {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
}

impl CellTape {
    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn state(&self) -> LstmState {
        LstmState {
            h: Vector::from(self.h.clone()),
            c: Vector::from(self.c.clone()),
        }
    }
}

pub fn lstm_step(p: &LstmParams, x: &Vector, s: &LstmState) -> Result<(LstmState, CellTape)> {
    if x.len() != p.input_dim {
        return Err(Error::shape("lstm input", p.input_dim, x.len()));
    }
    if s.h.len() != p.hidden_dim || s.c.len() != p.hidden_dim {
        return Err(Error::shape(
            "lstm state",
            p.hidden_dim,
            format!("h={}, c={}", s.h.len(), s.c.len()),
        ));
    }
    let tape = step(p, x.as_slice(), s.h.as_slice(), s.c.as_slice());
    Ok((tape.state(), tape))
}

pub(crate) fn step(p: &LstmParams, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> CellTape {
    let hd = p.hidden_dim;
    let mut z = p.b.as_slice().to_vec();
    p.w.matvec_acc(x, &mut z);
    p.u.matvec_acc(h_prev, &mut z);

    let i: Vec<f64> = z[..hd].iter().map(|&v| sigmoid_scalar(v)).collect();
    let f: Vec<f64> = z[hd..2 * hd].iter().map(|&v| sigmoid_scalar(v)).collect();
    let g: Vec<f64> = z[2 * hd..3 * hd].iter().map(|v| v.tanh()).collect();
    let o: Vec<f64> = z[3 * hd..].iter().map(|&v| sigmoid_scalar(v)).collect();

    let c: Vec<f64> = (0..hd).map(|j| f[j] * c_prev[j] + i[j] * g[j]).collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<f64> = (0..hd).map(|j| o[j] * tanh_c[j]).collect();

    CellTape {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        i,
        f,
        g,
        o,
        c,
        tanh_c,
        h,
    }
}

/// Gradients flowing out of one step, toward its input and previous state.
#[derive(Debug, Clone)]
pub struct StepGrads {
    pub dx: Vec<f64>,
    pub dh_prev: Vec<f64>,
    pub dc_prev: Vec<f64>,
}

/// Backward through one step. `dh` is the total sensitivity of the loss to
/// this step's `h'`, `dc` the sensitivity to `c'` arriving from the next step.
/// Parameter gradients are accumulated into `grads`.
pub(crate) fn step_backward(
    p: &LstmParams,
    tape: &CellTape,
    dh: &[f64],
    dc: &[f64],
    grads: &mut LstmParams,
) -> StepGrads {
    let hd = p.hidden_dim;
    let mut dz = vec![0.0; 4 * hd];
    let mut dc_prev = vec![0.0; hd];
    for j in 0..hd {
        let (i, f, g, o, t) = (tape.i[j], tape.f[j], tape.g[j], tape.o[j], tape.tanh_c[j]);
        let d_o = dh[j] * t;
        let dct = dc[j] + dh[j] * o * (1.0 - t * t);
        let di = dct * g;
        let dg = dct * i;
        let df = dct * tape.c_prev[j];
        dc_prev[j] = dct * f;
        dz[j] = di * i * (1.0 - i);
        dz[hd + j] = df * f * (1.0 - f);
        dz[2 * hd + j] = dg * (1.0 - g * g);
        dz[3 * hd + j] = d_o * o * (1.0 - o);
    }

    grads.w.add_outer(&dz, &tape.x);
    grads.u.add_outer(&dz, &tape.h_prev);
    for (gb, d) in grads.b.as_mut_slice().iter_mut().zip(&dz) {
        *gb += d;
    }

    let mut dx = vec![0.0; p.input_dim];
    p.w.matvec_t_acc(&dz, &mut dx);
    let mut dh_prev = vec![0.0; hd];
    p.u.matvec_t_acc(&dz, &mut dh_prev);
    StepGrads { dx, dh_prev, dc_prev }
}

/// Runs the cell over `inputs` from `init`, returning one tape per step and
/// the final state.
pub fn run_sequence(p: &LstmParams, inputs: &[Vector], init: &LstmState) -> Result<(Vec<CellTape>, LstmState)> {
    let mut state = init.clone();
    let mut tapes = Vec::with_capacity(inputs.len());
    for x in inputs {
        let (next, tape) = lstm_step(p, x, &state)?;
        state = next;
        tapes.push(tape);
    }
    Ok((tapes, state))
}

#[derive(Debug, Clone)]
pub struct SequenceGrads {
    pub params: LstmParams,
    /// Gradient with respect to each step's input, in time order.
    pub dx: Vec<Vector>,
    pub dh0: Vector,
    pub dc0: Vector,
}

/// Backpropagation through time over a recorded sequence.
///
/// `grad_h_seq[t]` is the direct sensitivity of the loss to `h_t`;
/// `grad_h_final` and `grad_c_final` are extra sensitivities on the last state
/// (for example from a decoder seeded by this sequence).
pub fn lstm_backward(
    p: &LstmParams,
    tapes: &[CellTape],
    grad_h_seq: &[Vector],
    grad_h_final: &Vector,
    grad_c_final: &Vector,
) -> Result<SequenceGrads> {
    if grad_h_seq.len() != tapes.len() {
        return Err(Error::shape(
            "lstm_backward per-step gradients",
            tapes.len(),
            grad_h_seq.len(),
        ));
    }
    let hd = p.hidden_dim;
    for (t, g) in grad_h_seq.iter().enumerate() {
        if g.len() != hd {
            return Err(Error::shape(format!("lstm_backward grad_h[{t}]"), hd, g.len()));
        }
    }
    if grad_h_final.len() != hd || grad_c_final.len() != hd {
        return Err(Error::shape(
            "lstm_backward final-state gradient",
            hd,
            format!("h={}, c={}", grad_h_final.len(), grad_c_final.len()),
        ));
    }

    let mut grads = LstmParams::zeros(p.input_dim, hd);
    let mut dx = vec![Vector::zeros(p.input_dim); tapes.len()];
    let mut dh_next = grad_h_final.as_slice().to_vec();
    let mut dc_next = grad_c_final.as_slice().to_vec();
    for t in (0..tapes.len()).rev() {
        let dh: Vec<f64> = dh_next.iter().zip(grad_h_seq[t].iter()).map(|(a, b)| a + b).collect();
        let sg = step_backward(p, &tapes[t], &dh, &dc_next, &mut grads);
        dx[t] = Vector::from(sg.dx);
        dh_next = sg.dh_prev;
        dc_next = sg.dc_prev;
    }
    Ok(SequenceGrads {
        params: grads,
        dx,
        dh0: Vector::from(dh_next),
        dc0: Vector::from(dc_next),
    })
}
