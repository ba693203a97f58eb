use crate::error::{Error, Result};
use crate::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid(format!("learning rate must be >= 0, got {}", self.lr)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(Error::invalid(format!("epsilon must be > 0, got {}", self.eps)));
        }
        Ok(())
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    m: ModelParams,
    v: ModelParams,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &ModelParams) -> Result<Self> {
        config.validate()?;
        Ok(AdamState {
            config,
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &ModelParams {
        &self.m
    }

    pub fn second_moment(&self) -> &ModelParams {
        &self.v
    }

    /// One update. Shapes and finiteness are checked before anything changes,
    /// so a rejected step leaves state and parameters untouched.
    pub fn step(&mut self, params: &mut ModelParams, grads: &ModelParams) -> Result<()> {
        if !params.same_shape(grads) || !params.same_shape(&self.m) {
            return Err(Error::shape(
                "adam step",
                "parameter layout",
                "mismatched gradient layout",
            ));
        }
        if let Some(path) = grads.first_non_finite() {
            return Err(Error::NonFinite(format!("gradient {path}")));
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        let tensors = params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.tensors_mut().into_iter().zip(self.v.tensors_mut()));
        for (((_, p), (_, g)), ((_, m), (_, v))) in tensors {
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use crate::numerics::Rng;

    fn params(seed: u64) -> ModelParams {
        let cfg = ModelConfig {
            input_dim: 1,
            hidden_dim: 2,
            ..ModelConfig::default()
        };
        ModelParams::init(cfg, &mut Rng::new(seed)).unwrap()
    }

    fn filled(like: &ModelParams, value: f64) -> ModelParams {
        let mut g = like.zeros_like();
        for (_, t) in g.tensors_mut() {
            t.fill(value);
        }
        g
    }

    #[test]
    fn zero_gradient_changes_nothing() {
        let mut p = params(0);
        let before = p.clone();
        let mut adam = AdamState::new(AdamConfig::default(), &p).unwrap();
        let g = p.zeros_like();
        adam.step(&mut p, &g).unwrap();
        assert_eq!(p, before);
        assert!(adam.first_moment().flatten().iter().all(|&v| v == 0.0));
        assert!(adam.second_moment().flatten().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = params(0).zeros_like();
        let cfg = AdamConfig {
            lr: 0.1,
            ..AdamConfig::default()
        };
        let mut adam = AdamState::new(cfg, &p).unwrap();
        let g = filled(&p, 1.0);
        adam.step(&mut p, &g).unwrap();
        // m̂ = v̂ = 1, so θ = -0.1 / (1 + 1e-8).
        for v in p.flatten() {
            assert!((v + 0.1 / (1.0 + 1e-8)).abs() < 1e-15);
            assert!((v + 0.1).abs() < 1e-8);
        }
    }

    #[test]
    fn first_step_is_odd_in_the_gradient() {
        let base = params(1);
        let mut rng = Rng::new(2);
        let mut g = base.zeros_like();
        for (_, t) in g.tensors_mut() {
            t.iter_mut().for_each(|v| *v = rng.uniform(-1.0, 1.0));
        }
        let mut neg = g.clone();
        neg.scale(-1.0);

        let (mut a, mut b) = (base.clone(), base.clone());
        AdamState::new(AdamConfig::default(), &base)
            .unwrap()
            .step(&mut a, &g)
            .unwrap();
        AdamState::new(AdamConfig::default(), &base)
            .unwrap()
            .step(&mut b, &neg)
            .unwrap();
        for (((x, y), z), gi) in a.flatten().iter().zip(b.flatten()).zip(base.flatten()).zip(g.flatten()) {
            let (da, db) = (x - z, y - z);
            assert!((da + db).abs() < 1e-15);
            assert_eq!(da.signum(), -gi.signum());
        }
    }

    #[test]
    fn rejects_non_finite_gradient_with_path() {
        let mut p = params(0);
        let mut g = p.zeros_like();
        g.dec_bw.u.as_mut_slice()[3] = f64::NAN;
        let before = p.clone();
        let mut adam = AdamState::new(AdamConfig::default(), &p).unwrap();
        let err = adam.step(&mut p, &g).unwrap_err().to_string();
        assert!(err.contains("dec_bw.u[3]"), "{err}");
        assert_eq!(p, before);
        assert_eq!(adam.step_count(), 0);
    }

    #[test]
    fn rejects_shape_mismatch() {
        let mut p = params(0);
        let other = ModelParams::zeros(ModelConfig {
            input_dim: 1,
            hidden_dim: 3,
            ..ModelConfig::default()
        })
        .unwrap();
        let mut adam = AdamState::new(AdamConfig::default(), &p).unwrap();
        assert!(adam.step(&mut p, &other).is_err());
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        let p = params(0);
        for cfg in [
            AdamConfig {
                lr: -1.0,
                ..AdamConfig::default()
            },
            AdamConfig {
                beta1: 1.0,
                ..AdamConfig::default()
            },
            AdamConfig {
                eps: 0.0,
                ..AdamConfig::default()
            },
        ] {
            assert!(AdamState::new(cfg, &p).is_err());
        }
    }
}
