//! Forward pass, composite loss and exact gradient of the imputation network.
//!
//! Execution is staged: both encoders run, then each decoder stream runs over
//! the whole gap feeding its own local prediction back as the next input, and
//! only then are the two streams scaled and merged step by step.

use crate::error::{Error, Result};
use crate::lstm::{self, CellTape, LstmParams, LstmState};
use crate::numerics::{mse_slice, Vector};

use super::params::{Affine, MergeLayer, ModelParams, Topology};
use super::schedule::{ScalingSchedule, ScheduleVariant};
use super::window::ImputationWindow;

#[derive(Debug, Clone)]
struct MergeCache {
    z: Vec<f64>,
    /// tanh activations of the merge MLP's hidden layer.
    a: Option<Vec<f64>>,
}

/// Everything computed by [`forward`], indexed by gap step `t = 0..T`.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub h_fw: Vec<Vector>,
    /// Empty for the forward-only topology.
    pub h_bw: Vec<Vector>,
    pub pred_fw: Vec<Vector>,
    /// Empty for the forward-only topology.
    pub pred_bw: Vec<Vector>,
    pub merged: Vec<Vector>,
    schedule: ScalingSchedule,
    topology: Topology,
    enc_fw: Vec<CellTape>,
    enc_bw: Vec<CellTape>,
    dec_fw: Vec<CellTape>,
    /// In processing order: index 0 is the last gap step.
    dec_bw: Vec<CellTape>,
    merge: Vec<MergeCache>,
}

impl ForwardTrace {
    pub fn gap_len(&self) -> usize {
        self.merged.len()
    }

    pub fn schedule(&self) -> &ScalingSchedule {
        &self.schedule
    }
}

fn check_inputs(
    params: &ModelParams,
    before: &[Vector],
    after: &[Vector],
    schedule: &ScalingSchedule,
    gap: usize,
) -> Result<()> {
    if before.is_empty() || after.is_empty() {
        return Err(Error::invalid("forward needs at least one observation on each side"));
    }
    if gap == 0 {
        return Err(Error::invalid("gap length must be >= 1"));
    }
    if schedule.len() != gap {
        return Err(Error::shape("scaling schedule length", gap, schedule.len()));
    }
    let d = params.input_dim();
    for (part, seq) in [("before", before), ("after", after)] {
        if let Some((i, v)) = seq.iter().enumerate().find(|(_, v)| v.len() != d) {
            return Err(Error::shape(format!("{part}[{i}]"), d, v.len()));
        }
    }
    Ok(())
}

fn encode(p: &LstmParams, inputs: impl Iterator<Item = Vector>) -> (Vec<CellTape>, LstmState) {
    let mut state = LstmState::zeros(p.hidden_dim());
    let mut tapes = Vec::new();
    for x in inputs {
        let tape = lstm::step(p, x.as_slice(), state.h.as_slice(), state.c.as_slice());
        state = tape.state();
        tapes.push(tape);
    }
    (tapes, state)
}

/// One decoder stream: self-feeding one-step-ahead prediction.
fn decode(
    p: &LstmParams,
    head: &Affine,
    init: &LstmState,
    first_input: &[f64],
    steps: usize,
) -> (Vec<CellTape>, Vec<Vec<f64>>) {
    let mut tapes = Vec::with_capacity(steps);
    let mut preds = Vec::with_capacity(steps);
    let mut input = first_input.to_vec();
    let (mut h, mut c) = (init.h.as_slice().to_vec(), init.c.as_slice().to_vec());
    for _ in 0..steps {
        let tape = lstm::step(p, &input, &h, &c);
        let pred = head.apply(tape.h());
        h = tape.h().to_vec();
        c = tape.c().to_vec();
        input = pred.clone();
        tapes.push(tape);
        preds.push(pred);
    }
    (tapes, preds)
}

fn merge_forward(merge: &MergeLayer, z: Vec<f64>) -> (Vec<f64>, MergeCache) {
    match merge {
        MergeLayer::Linear(a) => (a.apply(&z), MergeCache { z, a: None }),
        MergeLayer::Mlp { hidden, out } => {
            let act: Vec<f64> = hidden.apply(&z).into_iter().map(f64::tanh).collect();
            let y = out.apply(&act);
            (y, MergeCache { z, a: Some(act) })
        }
    }
}

/// Returns `dL/dz`.
fn merge_backward(merge: &MergeLayer, cache: &MergeCache, dy: &[f64], grads: &mut MergeLayer) -> Vec<f64> {
    match (merge, grads) {
        (MergeLayer::Linear(a), MergeLayer::Linear(ga)) => a.backward(&cache.z, dy, ga),
        (MergeLayer::Mlp { hidden, out }, MergeLayer::Mlp { hidden: gh, out: go }) => {
            let act = cache.a.as_ref().expect("mlp merge caches activations");
            let da = out.backward(act, dy, go);
            let dpre: Vec<f64> = da.iter().zip(act).map(|(d, a)| d * (1.0 - a * a)).collect();
            hidden.backward(&cache.z, &dpre, gh)
        }
        _ => unreachable!("gradient buffer mirrors parameter layout"),
    }
}

fn forward_context(
    params: &ModelParams,
    before: &[Vector],
    after: &[Vector],
    gap: usize,
    schedule: &ScalingSchedule,
) -> Result<ForwardTrace> {
    check_inputs(params, before, after, schedule, gap)?;
    let hd = params.hidden_dim();
    let bidirectional = params.topology() == Topology::Bidirectional;

    let (enc_fw, fw_state) = encode(&params.enc_fw, before.iter().cloned());
    let (dec_fw, pred_fw) = decode(
        &params.dec_fw,
        &params.head_fw,
        &fw_state,
        before[before.len() - 1].as_slice(),
        gap,
    );

    let (enc_bw, dec_bw, pred_bw_proc) = if bidirectional {
        let (enc_bw, bw_state) = encode(&params.enc_bw, after.iter().rev().cloned());
        let (dec_bw, preds) = decode(&params.dec_bw, &params.head_bw, &bw_state, after[0].as_slice(), gap);
        (enc_bw, dec_bw, preds)
    } else {
        (Vec::new(), Vec::new(), Vec::new())
    };

    let mut merged = Vec::with_capacity(gap);
    let mut merge = Vec::with_capacity(gap);
    for t in 0..gap {
        let mut z = vec![0.0; 2 * hd];
        let h_fw = dec_fw[t].h();
        if bidirectional {
            let h_bw = dec_bw[gap - 1 - t].h();
            let (g, gp) = (schedule.gamma(t), schedule.gamma_prime(t));
            for j in 0..hd {
                z[j] = g * h_fw[j];
                z[hd + j] = gp * h_bw[j];
            }
        } else {
            z[..hd].copy_from_slice(h_fw);
        }
        let (y, cache) = merge_forward(&params.merge, z);
        merged.push(Vector::from(y));
        merge.push(cache);
    }

    let h_fw = dec_fw.iter().map(|t| Vector::from(t.h().to_vec())).collect();
    let h_bw = dec_bw.iter().rev().map(|t| Vector::from(t.h().to_vec())).collect();
    let pred_fw = pred_fw.into_iter().map(Vector::from).collect();
    let pred_bw = pred_bw_proc.into_iter().rev().map(Vector::from).collect();

    Ok(ForwardTrace {
        h_fw,
        h_bw,
        pred_fw,
        pred_bw,
        merged,
        schedule: schedule.clone(),
        topology: params.topology(),
        enc_fw,
        enc_bw,
        dec_fw,
        dec_bw,
        merge,
    })
}

/// Runs the network on a window. The window's ground truth is not consulted;
/// only its length fixes the number of decoder steps.
pub fn forward(params: &ModelParams, window: &ImputationWindow, schedule: &ScalingSchedule) -> Result<ForwardTrace> {
    forward_context(params, &window.before, &window.after, window.gap_len(), schedule)
}

/// Fills a gap of `gap` steps between `before` and `after`.
pub fn impute(
    params: &ModelParams,
    before: &[Vector],
    after: &[Vector],
    gap: usize,
    variant: ScheduleVariant,
) -> Result<Vec<Vector>> {
    let schedule = ScalingSchedule::new(gap, variant)?;
    Ok(forward_context(params, before, after, gap, &schedule)?.merged)
}

/// Loss sensitivities on each output sequence, indexed by gap step.
#[derive(Debug, Clone)]
pub struct OutputGrads {
    pub merged: Vec<Vector>,
    pub fw: Vec<Vector>,
    /// Ignored for the forward-only topology.
    pub bw: Vec<Vector>,
}

impl OutputGrads {
    pub fn zeros(gap: usize, dim: usize) -> Self {
        OutputGrads {
            merged: vec![Vector::zeros(dim); gap],
            fw: vec![Vector::zeros(dim); gap],
            bw: vec![Vector::zeros(dim); gap],
        }
    }
}

fn check_truth(trace: &ForwardTrace, truth: &[Vector]) -> Result<()> {
    if truth.len() != trace.gap_len() {
        return Err(Error::shape("ground truth length", trace.gap_len(), truth.len()));
    }
    let d = trace.merged[0].len();
    if let Some((i, v)) = truth.iter().enumerate().find(|(_, v)| v.len() != d) {
        return Err(Error::shape(format!("ground truth[{i}]"), d, v.len()));
    }
    Ok(())
}

/// Composite loss: mean over gap steps of the merged, forward-head and
/// backward-head squared errors. The forward-only topology has no
/// backward-head term.
pub fn loss(trace: &ForwardTrace, truth: &[Vector]) -> Result<f64> {
    check_truth(trace, truth)?;
    let (merged, fw, bw) = loss_terms(trace, truth);
    Ok(merged + fw + bw)
}

/// The three components of [`loss`], each already divided by `T`.
pub fn loss_terms(trace: &ForwardTrace, truth: &[Vector]) -> (f64, f64, f64) {
    let gap = trace.gap_len() as f64;
    let term = |preds: &[Vector]| -> f64 {
        preds
            .iter()
            .zip(truth)
            .map(|(p, x)| mse_slice(x.as_slice(), p.as_slice()))
            .sum::<f64>()
            / gap
    };
    let bw = match trace.topology {
        Topology::Bidirectional => term(&trace.pred_bw),
        Topology::ForwardOnly => 0.0,
    };
    (term(&trace.merged), term(&trace.pred_fw), bw)
}

fn loss_grads(trace: &ForwardTrace, truth: &[Vector]) -> OutputGrads {
    let gap = trace.gap_len();
    let dim = truth[0].len();
    let k = 2.0 / (gap * dim) as f64;
    let diff = |preds: &[Vector]| -> Vec<Vector> {
        preds
            .iter()
            .zip(truth)
            .map(|(p, x)| Vector::from(p.iter().zip(x.iter()).map(|(a, b)| k * (a - b)).collect::<Vec<_>>()))
            .collect()
    };
    let bw = match trace.topology {
        Topology::Bidirectional => diff(&trace.pred_bw),
        Topology::ForwardOnly => vec![Vector::zeros(dim); gap],
    };
    OutputGrads {
        merged: diff(&trace.merged),
        fw: diff(&trace.pred_fw),
        bw,
    }
}

#[derive(Debug, Clone)]
pub struct Gradients {
    pub params: ModelParams,
    /// Sensitivity of the loss to `h_fw[t]` arriving through the merge layer
    /// alone (already multiplied by `gamma[t]`).
    pub merge_dh_fw: Vec<Vector>,
    /// Same for `h_bw[t]` and `gamma_prime[t]`; empty for forward-only.
    pub merge_dh_bw: Vec<Vector>,
}

/// Reverse pass through one decoder stream, in processing order. Returns the
/// gradient on the stream's initial state.
fn decoder_backward(
    p: &LstmParams,
    head: &Affine,
    tapes: &[CellTape],
    d_pred: &[&Vector],
    dh_merge: &[&[f64]],
    g_lstm: &mut LstmParams,
    g_head: &mut Affine,
) -> (Vec<f64>, Vec<f64>) {
    let hd = p.hidden_dim();
    let mut dh_rec = vec![0.0; hd];
    let mut dc_rec = vec![0.0; hd];
    let mut dx_next = vec![0.0; p.input_dim()];
    for k in (0..tapes.len()).rev() {
        // Prediction k is both scored by the loss and fed to step k + 1.
        let dpred: Vec<f64> = d_pred[k].iter().zip(&dx_next).map(|(a, b)| a + b).collect();
        let dh_head = head.backward(tapes[k].h(), &dpred, g_head);
        let dh: Vec<f64> = (0..hd).map(|j| dh_head[j] + dh_merge[k][j] + dh_rec[j]).collect();
        let sg = lstm::step_backward(p, &tapes[k], &dh, &dc_rec, g_lstm);
        dx_next = sg.dx;
        dh_rec = sg.dh_prev;
        dc_rec = sg.dc_prev;
    }
    (dh_rec, dc_rec)
}

fn encoder_backward(p: &LstmParams, tapes: &[CellTape], dh: Vec<f64>, dc: Vec<f64>, g: &mut LstmParams) {
    let (mut dh, mut dc) = (dh, dc);
    for tape in tapes.iter().rev() {
        let sg = lstm::step_backward(p, tape, &dh, &dc, g);
        dh = sg.dh_prev;
        dc = sg.dc_prev;
    }
}

/// Backpropagates arbitrary output sensitivities through a recorded trace.
pub fn backward_from_outputs(params: &ModelParams, trace: &ForwardTrace, upstream: &OutputGrads) -> Result<Gradients> {
    let gap = trace.gap_len();
    for (name, seq) in [("merged", &upstream.merged), ("fw", &upstream.fw), ("bw", &upstream.bw)] {
        if seq.len() != gap {
            return Err(Error::shape(format!("upstream {name} gradients"), gap, seq.len()));
        }
    }
    if trace.topology != params.topology() {
        return Err(Error::invalid("trace was produced by a different topology"));
    }
    let hd = params.hidden_dim();
    let bidirectional = trace.topology == Topology::Bidirectional;
    let mut g = params.zeros_like();

    let mut merge_dh_fw = Vec::with_capacity(gap);
    let mut merge_dh_bw = Vec::with_capacity(gap);
    for t in 0..gap {
        let dz = merge_backward(
            &params.merge,
            &trace.merge[t],
            upstream.merged[t].as_slice(),
            &mut g.merge,
        );
        if bidirectional {
            let (gm, gpm) = (trace.schedule.gamma(t), trace.schedule.gamma_prime(t));
            merge_dh_fw.push(Vector::from(dz[..hd].iter().map(|d| gm * d).collect::<Vec<_>>()));
            merge_dh_bw.push(Vector::from(dz[hd..].iter().map(|d| gpm * d).collect::<Vec<_>>()));
        } else {
            merge_dh_fw.push(Vector::from(dz[..hd].to_vec()));
        }
    }

    let d_pred: Vec<&Vector> = upstream.fw.iter().collect();
    let dh_merge: Vec<&[f64]> = merge_dh_fw.iter().map(Vector::as_slice).collect();
    let (dh0, dc0) = decoder_backward(
        &params.dec_fw,
        &params.head_fw,
        &trace.dec_fw,
        &d_pred,
        &dh_merge,
        &mut g.dec_fw,
        &mut g.head_fw,
    );
    encoder_backward(&params.enc_fw, &trace.enc_fw, dh0, dc0, &mut g.enc_fw);

    if bidirectional {
        // The backward stream ran from the last gap step to the first.
        let d_pred: Vec<&Vector> = upstream.bw.iter().rev().collect();
        let dh_merge: Vec<&[f64]> = merge_dh_bw.iter().rev().map(Vector::as_slice).collect();
        let (dh0, dc0) = decoder_backward(
            &params.dec_bw,
            &params.head_bw,
            &trace.dec_bw,
            &d_pred,
            &dh_merge,
            &mut g.dec_bw,
            &mut g.head_bw,
        );
        encoder_backward(&params.enc_bw, &trace.enc_bw, dh0, dc0, &mut g.enc_bw);
    }

    Ok(Gradients {
        params: g,
        merge_dh_fw,
        merge_dh_bw,
    })
}

/// Loss on the window's ground truth and its exact gradient.
pub fn backward(
    params: &ModelParams,
    window: &ImputationWindow,
    schedule: &ScalingSchedule,
) -> Result<(f64, Gradients)> {
    let trace = forward(params, window, schedule)?;
    check_truth(&trace, &window.missing)?;
    let value = loss(&trace, &window.missing)?;
    let upstream = loss_grads(&trace, &window.missing);
    Ok((value, backward_from_outputs(params, &trace, &upstream)?))
}

/// Loss of `params` on one window; convenience for finite differences.
pub fn window_loss(params: &ModelParams, window: &ImputationWindow, schedule: &ScalingSchedule) -> Result<f64> {
    let trace = forward(params, window, schedule)?;
    loss(&trace, &window.missing)
}
