use super::*;
use crate::gradcheck::{check_instance, random_instance, GradCheckConfig};
use crate::lstm::LstmParams;
use crate::numerics::{Rng, Vector};

fn tiny_config(hidden_dim: usize) -> ModelConfig {
    ModelConfig {
        input_dim: 1,
        hidden_dim,
        ..ModelConfig::default()
    }
}

fn scalars(v: &[Vector]) -> Vec<f64> {
    v.iter().map(|x| x[0]).collect()
}

// ---- straight-line oracle, written without the library's cell or merge code

fn oracle_cell(p: &LstmParams, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let hd = p.hidden_dim();
    let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
    let pre = |gate: usize, j: usize| {
        let r = gate * hd + j;
        let mut s = p.b[r];
        for (k, xv) in x.iter().enumerate() {
            s += p.w[(r, k)] * xv;
        }
        for (k, hv) in h.iter().enumerate() {
            s += p.u[(r, k)] * hv;
        }
        s
    };
    let mut h2 = vec![0.0; hd];
    let mut c2 = vec![0.0; hd];
    for j in 0..hd {
        c2[j] = sig(pre(1, j)) * c[j] + sig(pre(0, j)) * pre(2, j).tanh();
        h2[j] = sig(pre(3, j)) * c2[j].tanh();
    }
    (h2, c2)
}

fn oracle_affine(a: &Affine, x: &[f64]) -> Vec<f64> {
    (0..a.output_dim())
        .map(|i| a.bias[i] + (0..a.input_dim()).map(|j| a.weight[(i, j)] * x[j]).sum::<f64>())
        .collect()
}

/// Returns (merged, fw preds, bw preds) for a linear-merge bidirectional model.
fn oracle_forward(
    p: &ModelParams,
    before: &[f64],
    after: &[f64],
    gap: usize,
    gamma: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let hd = p.hidden_dim();
    let (mut h, mut c) = (vec![0.0; hd], vec![0.0; hd]);
    for &x in before {
        (h, c) = oracle_cell(&p.enc_fw, &[x], &h, &c);
    }
    let mut x = before[before.len() - 1];
    let (mut hf, mut pf) = (vec![], vec![]);
    for _ in 0..gap {
        (h, c) = oracle_cell(&p.dec_fw, &[x], &h, &c);
        x = oracle_affine(&p.head_fw, &h)[0];
        hf.push(h.clone());
        pf.push(x);
    }

    let (mut h, mut c) = (vec![0.0; hd], vec![0.0; hd]);
    for &x in after.iter().rev() {
        (h, c) = oracle_cell(&p.enc_bw, &[x], &h, &c);
    }
    let mut x = after[0];
    let (mut hb, mut pb) = (vec![vec![]; gap], vec![0.0; gap]);
    for t in (0..gap).rev() {
        (h, c) = oracle_cell(&p.dec_bw, &[x], &h, &c);
        x = oracle_affine(&p.head_bw, &h)[0];
        hb[t] = h.clone();
        pb[t] = x;
    }

    let MergeLayer::Linear(m) = &p.merge else {
        panic!("oracle covers the linear merge only")
    };
    let merged = (0..gap)
        .map(|t| {
            let z: Vec<f64> = hf[t]
                .iter()
                .map(|v| gamma[t] * v)
                .chain(hb[t].iter().map(|v| (1.0 - gamma[t]) * v))
                .collect();
            oracle_affine(m, &z)[0]
        })
        .collect();
    (merged, pf, pb)
}

#[test]
fn forward_matches_straight_line_oracle() {
    let mut rng = Rng::new(0);
    let p = ModelParams::init(tiny_config(2), &mut rng).unwrap();
    let before = [0.3, -0.2, 0.9];
    let after = [0.1, 0.5, -0.7];
    let w = ImputationWindow::from_scalars(&before, &[0.0; 3], &after).unwrap();
    let s = ScalingSchedule::new(3, ScheduleVariant::PaperEq1).unwrap();
    let trace = forward(&p, &w, &s).unwrap();
    let (merged, pf, pb) = oracle_forward(&p, &before, &after, 3, s.gammas());
    for t in 0..3 {
        assert!((trace.merged[t][0] - merged[t]).abs() < 1e-14);
        assert!((trace.pred_fw[t][0] - pf[t]).abs() < 1e-14);
        assert!((trace.pred_bw[t][0] - pb[t]).abs() < 1e-14);
    }
}

#[test]
fn zero_params_predict_merge_bias() {
    let mut p = ModelParams::zeros(ModelConfig {
        input_dim: 2,
        hidden_dim: 3,
        ..ModelConfig::default()
    })
    .unwrap();
    let MergeLayer::Linear(m) = &mut p.merge else {
        unreachable!()
    };
    m.bias = Vector::from(vec![0.25, -4.0]);
    let v = |a: f64| Vector::from(vec![a, -a]);
    let w = ImputationWindow::new(vec![v(1.0), v(2.0)], vec![v(0.0); 4], vec![v(3.0)]).unwrap();
    let trace = forward(&p, &w, &ScalingSchedule::new(4, ScheduleVariant::PaperEq1).unwrap()).unwrap();
    for x in &trace.merged {
        assert_eq!(x.as_slice(), &[0.25, -4.0]);
    }
}

#[test]
fn zero_gamma_silences_forward_stream() {
    let mut rng = Rng::new(3);
    let mut p = ModelParams::init(tiny_config(1), &mut rng).unwrap();
    p.merge = MergeLayer::Linear(Affine {
        weight: crate::numerics::Matrix::from_vec(1, 2, vec![1.0, 1.0]).unwrap(),
        bias: Vector::zeros(1),
    });
    let w = ImputationWindow::from_scalars(&[0.2, 0.4, 0.6], &[0.0, 0.0], &[0.8, 1.0, 1.2]).unwrap();
    let s = ScalingSchedule::new(2, ScheduleVariant::PaperEq1).unwrap();
    assert_eq!(s.gammas(), &[0.5, 0.0]);
    let trace = forward(&p, &w, &s).unwrap();
    assert_eq!(trace.merged[1][0], trace.h_bw[1][0]);
    assert_eq!(trace.merged[0][0], 0.5 * trace.h_fw[0][0] + 0.5 * trace.h_bw[0][0]);

    // Perturbing the forward decoder changes step 0 but not step 1.
    let mut q = p.clone();
    q.dec_fw.b.as_mut_slice().iter_mut().for_each(|v| *v += 0.5);
    let t2 = forward(&q, &w, &s).unwrap();
    assert_eq!(t2.merged[1][0], trace.merged[1][0]);
    assert_ne!(t2.merged[0][0], trace.merged[0][0]);
}

/// Zero LSTMs and heads, so every output equals its layer's bias.
fn constant_output_model(merged: f64, fw: f64, bw: f64) -> ModelParams {
    let mut p = ModelParams::zeros(tiny_config(2)).unwrap();
    let MergeLayer::Linear(m) = &mut p.merge else {
        unreachable!()
    };
    m.bias[0] = merged;
    p.head_fw.bias[0] = fw;
    p.head_bw.bias[0] = bw;
    p
}

#[test]
fn loss_worked_example() {
    let p = constant_output_model(1.0, 2.0, 3.0);
    let w = ImputationWindow::from_scalars(&[0.0], &[0.0], &[0.0]).unwrap();
    let s = ScalingSchedule::new(1, ScheduleVariant::PaperEq1).unwrap();
    let trace = forward(&p, &w, &s).unwrap();
    assert_eq!(loss(&trace, &w.missing).unwrap(), 14.0);

    // Doubling every residual quadruples the loss.
    let p2 = constant_output_model(2.0, 4.0, 6.0);
    let trace2 = forward(&p2, &w, &s).unwrap();
    assert_eq!(loss(&trace2, &w.missing).unwrap(), 56.0);
}

#[test]
fn perfect_prediction_has_zero_loss_and_gradient() {
    let p = constant_output_model(0.7, 0.7, 0.7);
    let w = ImputationWindow::from_scalars(&[1.0, 2.0], &[0.7, 0.7, 0.7], &[3.0]).unwrap();
    let s = ScalingSchedule::new(3, ScheduleVariant::Endpoint).unwrap();
    let (l, g) = backward(&p, &w, &s).unwrap();
    assert_eq!(l, 0.0);
    assert!(g.params.flatten().iter().all(|&v| v == 0.0));
}

#[test]
fn loss_is_mean_of_three_terms() {
    let mut rng = Rng::new(12);
    let p = ModelParams::init(tiny_config(3), &mut rng).unwrap();
    let w = ImputationWindow::from_scalars(&[0.1, 0.2, 0.3], &[0.5, -0.5, 0.25, 1.0], &[0.0, 0.4, 0.8]).unwrap();
    let s = ScalingSchedule::new(4, ScheduleVariant::PaperEq1).unwrap();
    let trace = forward(&p, &w, &s).unwrap();
    let per = |preds: &[Vector]| -> f64 {
        preds
            .iter()
            .zip(&w.missing)
            .map(|(a, b)| (a[0] - b[0]).powi(2))
            .sum::<f64>()
            / 4.0
    };
    let expect = per(&trace.merged) + per(&trace.pred_fw) + per(&trace.pred_bw);
    assert!((loss(&trace, &w.missing).unwrap() - expect).abs() < 1e-15);
    assert!(loss(&trace, &w.missing[..3]).is_err());
}

#[test]
fn dimension_errors() {
    let p = ModelParams::zeros(tiny_config(2)).unwrap();
    let w = ImputationWindow::from_scalars(&[0.0], &[0.0, 0.0], &[0.0]).unwrap();
    let wrong_len = ScalingSchedule::new(3, ScheduleVariant::PaperEq1).unwrap();
    assert!(forward(&p, &w, &wrong_len).is_err());
    let two_d = ImputationWindow::new(vec![Vector::zeros(2)], vec![Vector::zeros(2)], vec![Vector::zeros(2)]).unwrap();
    assert!(forward(&p, &two_d, &ScalingSchedule::new(1, ScheduleVariant::PaperEq1).unwrap()).is_err());
    assert!(impute(&p, &[], &[Vector::zeros(1)], 2, ScheduleVariant::PaperEq1).is_err());
    assert!(ImputationWindow::from_scalars(&[], &[1.0], &[1.0]).is_err());
}

#[test]
fn impute_matches_trace_and_is_deterministic() {
    let mut rng = Rng::new(7);
    let p = ModelParams::init(tiny_config(4), &mut rng).unwrap();
    let w = ImputationWindow::from_scalars(&[0.5, 0.1, -0.3], &[9.0, 9.0, 9.0], &[0.2, 0.2, 0.6]).unwrap();
    let s = ScalingSchedule::new(3, ScheduleVariant::PaperEq1).unwrap();
    let trace = forward(&p, &w, &s).unwrap();
    let a = impute(&p, &w.before, &w.after, 3, ScheduleVariant::PaperEq1).unwrap();
    let b = impute(&p, &w.before, &w.after, 3, ScheduleVariant::PaperEq1).unwrap();
    assert_eq!(a, trace.merged);
    let bits = |v: &[Vector]| v.iter().map(|x| x[0].to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn full_gradient_matches_finite_differences() {
    let cfg = GradCheckConfig::default();
    let mut rng = Rng::new(99);
    for index in 0..25 {
        let (p, w, s) = random_instance(&cfg, index, &mut rng).unwrap();
        let (err, idx, a, n) = check_instance(&p, &w, &s, 1e-5, None).unwrap();
        assert!(
            err < 1e-4,
            "instance {index} ({}): {} analytic {a} numeric {n}",
            p.config(),
            p.param_path(idx).unwrap()
        );
    }
}

fn upstream_on_merged_slot(gap: usize, slot: usize, values: &[f64]) -> OutputGrads {
    let mut up = OutputGrads::zeros(gap, values.len());
    up.merged[slot] = Vector::from(values.to_vec());
    up
}

#[test]
fn merge_path_gradient_scales_with_gamma() {
    let mut rng = Rng::new(0);
    let p = ModelParams::init(
        ModelConfig {
            input_dim: 2,
            ..tiny_config(3)
        },
        &mut rng,
    )
    .unwrap();
    let v = |a: f64, b: f64| Vector::from(vec![a, b]);
    let w = ImputationWindow::new(
        vec![v(0.1, 0.2), v(0.3, -0.1), v(0.0, 0.5)],
        vec![v(0.0, 0.0); 3],
        vec![v(-0.4, 0.2), v(0.6, 0.1), v(0.2, 0.2)],
    )
    .unwrap();
    let base = ScalingSchedule::new(3, ScheduleVariant::PaperEq1).unwrap();
    let slot = 0;
    let up = upstream_on_merged_slot(3, slot, &[0.7, -1.3]);
    let g0 = backward_from_outputs(&p, &forward(&p, &w, &base).unwrap(), &up).unwrap();
    for c in [0.0, 2.0] {
        let scaled = base.with_gamma(slot, c * base.gamma(slot));
        let gc = backward_from_outputs(&p, &forward(&p, &w, &scaled).unwrap(), &up).unwrap();
        for (a, b) in gc.merge_dh_fw[slot].iter().zip(g0.merge_dh_fw[slot].iter()) {
            assert!((a - c * b).abs() <= 1e-12);
        }
        // Forward-path parameters only see the slot through the merge.
        for (name, lstm_c, lstm_0) in [
            ("dec_fw", &gc.params.dec_fw, &g0.params.dec_fw),
            ("enc_fw", &gc.params.enc_fw, &g0.params.enc_fw),
        ] {
            for ((_, a), (_, b)) in lstm_c.tensors().iter().zip(lstm_0.tensors().iter()) {
                for (x, y) in a.iter().zip(b.iter()) {
                    assert!((x - c * y).abs() <= 1e-12, "{name}");
                }
            }
        }
        // The backward stream is untouched by a change to gamma alone.
        assert_eq!(gc.merge_dh_bw[slot], g0.merge_dh_bw[slot]);
    }
}

#[test]
fn zero_gamma_blocks_merge_gradient() {
    let mut rng = Rng::new(5);
    let p = ModelParams::init(tiny_config(3), &mut rng).unwrap();
    let w = ImputationWindow::from_scalars(&[0.1, 0.2, 0.3], &[0.4, 0.5], &[0.6, 0.7, 0.8]).unwrap();
    let s = ScalingSchedule::new(2, ScheduleVariant::PaperEq1).unwrap();
    assert_eq!(s.gamma(1), 0.0);
    let up = upstream_on_merged_slot(2, 1, &[1.0]);
    let g = backward_from_outputs(&p, &forward(&p, &w, &s).unwrap(), &up).unwrap();
    assert!(g.merge_dh_fw[1].iter().all(|&v| v == 0.0));
    assert!(g
        .params
        .dec_fw
        .tensors()
        .iter()
        .all(|(_, t)| t.iter().all(|&v| v == 0.0)));
    assert!(g
        .params
        .enc_fw
        .tensors()
        .iter()
        .all(|(_, t)| t.iter().all(|&v| v == 0.0)));
    assert!(g.params.dec_bw.b.iter().any(|&v| v != 0.0));
}

#[test]
fn backward_stream_isolated_when_gamma_prime_is_zero() {
    let mut rng = Rng::new(6);
    let mut p = ModelParams::init(tiny_config(3), &mut rng).unwrap();
    let MergeLayer::Linear(m) = &mut p.merge else {
        unreachable!()
    };
    for j in 3..6 {
        m.weight[(0, j)] = 0.0;
    }
    let w = ImputationWindow::from_scalars(&[0.1, 0.2, 0.3], &[0.4, 0.5, 0.6], &[0.6, 0.7, 0.8]).unwrap();
    let s = ScalingSchedule::custom(vec![1.0; 3], vec![0.0; 3]).unwrap();
    let trace = forward(&p, &w, &s).unwrap();
    let mut up = OutputGrads::zeros(3, 1);
    up.merged = trace
        .merged
        .iter()
        .zip(&w.missing)
        .map(|(a, b)| Vector::from(vec![a[0] - b[0]]))
        .collect();
    let g = backward_from_outputs(&p, &trace, &up).unwrap();
    for lstm in [&g.params.enc_bw, &g.params.dec_bw] {
        assert!(lstm.tensors().iter().all(|(_, t)| t.iter().all(|&v| v == 0.0)));
    }
    assert!(g.params.enc_fw.b.iter().any(|&v| v != 0.0));

    // And the merged output reproduces a forward-only decoder's merge.
    let mut fo_cfg = *p.config();
    fo_cfg.topology = Topology::ForwardOnly;
    let mut fo = ModelParams::zeros(fo_cfg).unwrap();
    fo.assign_flat(&p.flatten()).unwrap();
    let fo_trace = forward(&fo, &w, &s).unwrap();
    assert_eq!(scalars(&fo_trace.merged), scalars(&trace.merged));
}

#[test]
fn forward_only_ignores_backward_parameters() {
    let mut rng = Rng::new(8);
    let cfg = ModelConfig {
        topology: Topology::ForwardOnly,
        ..tiny_config(3)
    };
    let p = ModelParams::init(cfg, &mut rng).unwrap();
    let w = ImputationWindow::from_scalars(&[0.1, 0.2, 0.3], &[0.4, 0.5], &[0.6, 0.7, 0.8]).unwrap();
    let s = ScalingSchedule::new(2, ScheduleVariant::PaperEq1).unwrap();
    let mut q = p.clone();
    q.enc_bw.w.as_mut_slice()[0] += 1.0;
    q.dec_bw.b.as_mut_slice()[0] += 1.0;
    q.head_bw.bias[0] += 1.0;
    let a = forward(&p, &w, &s).unwrap();
    let b = forward(&q, &w, &s).unwrap();
    assert_eq!(a.merged, b.merged);
    assert!(a.pred_bw.is_empty() && a.h_bw.is_empty());
    let (_, g) = backward(&p, &w, &s).unwrap();
    assert!(g
        .params
        .dec_bw
        .tensors()
        .iter()
        .all(|(_, t)| t.iter().all(|&v| v == 0.0)));
    assert!(g.merge_dh_bw.is_empty());
}
