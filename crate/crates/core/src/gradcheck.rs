//! Full-model gradient verification against central finite differences.

use crate::error::{Error, Result};
use crate::model::{
    backward, window_loss, ImputationWindow, ModelConfig, ModelParams, ScalingSchedule, ScheduleVariant, Topology,
};
use crate::numerics::{finite_diff_grad, Rng};

/// Denominator floor for relative errors, so coordinates whose true gradient
/// is essentially zero are judged on absolute error instead.
pub const RELATIVE_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    pub seed: u64,
    pub instances: usize,
    pub max_input_dim: usize,
    pub max_hidden: usize,
    pub context: usize,
    pub max_gap: usize,
    pub eps: f64,
    pub tolerance: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            seed: 0,
            instances: 20,
            max_input_dim: 3,
            max_hidden: 4,
            context: 3,
            max_gap: 3,
            eps: 1e-5,
            tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct InstanceResult {
    pub index: usize,
    pub config: ModelConfig,
    pub gap: usize,
    pub num_params: usize,
    pub max_rel_error: f64,
    pub worst_path: String,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub instances: Vec<InstanceResult>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn worst(&self) -> Option<&InstanceResult> {
        self.instances
            .iter()
            .max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
    }

    pub fn max_rel_error(&self) -> f64 {
        self.worst().map_or(0.0, |w| w.max_rel_error)
    }

    pub fn passed(&self) -> bool {
        self.max_rel_error() < self.tolerance
    }
}

/// Compares the analytic gradient of the composite loss on one window against
/// central differences. `corruption` is added to one analytic coordinate; it
/// exists so the checker itself can be shown to fail.
pub fn check_instance(
    params: &ModelParams,
    window: &ImputationWindow,
    schedule: &ScalingSchedule,
    eps: f64,
    corruption: Option<f64>,
) -> Result<(f64, usize, f64, f64)> {
    let (_, grads) = backward(params, window, schedule)?;
    let mut analytic = grads.params.flatten();
    if let Some(delta) = corruption {
        let k = analytic.len() / 2;
        analytic[k] += delta;
    }
    let mut probe = params.clone();
    let mut flat = params.flatten();
    let numeric = finite_diff_grad(
        |theta| {
            probe.assign_flat(theta).expect("same layout");
            window_loss(&probe, window, schedule).unwrap_or(f64::NAN)
        },
        &mut flat,
        eps,
    )?;
    let (mut worst, mut worst_idx) = (0.0, 0);
    for (i, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
        let e = relative_error(*a, *n);
        if e > worst || i == 0 {
            worst = e;
            worst_idx = i;
        }
    }
    Ok((worst, worst_idx, analytic[worst_idx], numeric[worst_idx]))
}

/// A random tiny model and window. Instances cycle through both schedule
/// variants, the MLP merge and the forward-only topology.
pub fn random_instance(
    cfg: &GradCheckConfig,
    index: usize,
    rng: &mut Rng,
) -> Result<(ModelParams, ImputationWindow, ScalingSchedule)> {
    let input_dim = 1 + rng.below(cfg.max_input_dim);
    let hidden_dim = 1 + rng.below(cfg.max_hidden);
    let gap = 1 + rng.below(cfg.max_gap);
    let schedule_variant = if index.is_multiple_of(2) {
        ScheduleVariant::PaperEq1
    } else {
        ScheduleVariant::Endpoint
    };
    let config = ModelConfig {
        input_dim,
        hidden_dim,
        schedule: schedule_variant,
        merge_hidden: (index % 4 == 3).then_some(1 + rng.below(cfg.max_hidden)),
        topology: if index % 5 == 4 {
            Topology::ForwardOnly
        } else {
            Topology::Bidirectional
        },
    };
    let mut params = ModelParams::init(config, rng)?;
    // Break the zero biases of the initializer.
    for (_, t) in params.tensors_mut() {
        for v in t.iter_mut() {
            *v += rng.uniform(-0.3, 0.3);
        }
    }
    let mut seq = |len: usize| -> Vec<Vec<f64>> {
        (0..len)
            .map(|_| (0..input_dim).map(|_| rng.uniform(-1.0, 1.0)).collect())
            .collect()
    };
    let wrap = |v: Vec<Vec<f64>>| v.into_iter().map(Into::into).collect();
    let window = ImputationWindow::new(wrap(seq(cfg.context)), wrap(seq(gap)), wrap(seq(cfg.context)))?;
    let schedule = ScalingSchedule::new(gap, schedule_variant)?;
    Ok((params, window, schedule))
}

pub fn run_gradcheck(cfg: &GradCheckConfig, corruption: Option<f64>) -> Result<GradCheckReport> {
    if cfg.instances == 0 || cfg.max_input_dim == 0 || cfg.max_hidden == 0 || cfg.max_gap == 0 || cfg.context == 0 {
        return Err(Error::invalid("gradient check sizes must all be >= 1"));
    }
    let mut rng = Rng::new(cfg.seed);
    let mut instances = Vec::with_capacity(cfg.instances);
    for index in 0..cfg.instances {
        let (params, window, schedule) = random_instance(cfg, index, &mut rng)?;
        let (err, idx, analytic, numeric) = check_instance(&params, &window, &schedule, cfg.eps, corruption)?;
        instances.push(InstanceResult {
            index,
            config: *params.config(),
            gap: window.gap_len(),
            num_params: params.num_params(),
            max_rel_error: err,
            worst_path: params.param_path(idx).unwrap_or_default(),
            analytic,
            numeric,
        });
    }
    Ok(GradCheckReport {
        instances,
        tolerance: cfg.tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_passes() {
        let report = run_gradcheck(&GradCheckConfig::default(), None).unwrap();
        assert_eq!(report.instances.len(), 20);
        assert!(report.passed(), "max relative error {}", report.max_rel_error());
    }

    #[test]
    fn corrupted_gradient_fails_and_names_parameter() {
        let report = run_gradcheck(
            &GradCheckConfig {
                instances: 2,
                ..GradCheckConfig::default()
            },
            Some(1.0),
        )
        .unwrap();
        assert!(!report.passed());
        let worst = report.worst().unwrap();
        assert!(!worst.worst_path.is_empty());
        assert!((worst.analytic - worst.numeric).abs() > 0.5);
    }

    #[test]
    fn relative_error_uses_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1e-9, 0.0) - 1e-3).abs() < 1e-15);
        assert!((relative_error(2.0, 1.0) - 0.5).abs() < 1e-15);
    }
}
