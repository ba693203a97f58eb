//! Fixed linear weights that blend the forward and backward decoder streams.
//!
//! The forward stream is weighted by `gamma[t]` and the backward stream by
//! `gamma_prime[t] = 1 - gamma[t]`, so each stream dominates near the
//! observations its encoder saw.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numerics::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScheduleVariant {
    /// `gamma_t = 1 - t/T`, `t = 1..T`.
    #[default]
    PaperEq1,
    /// `gamma_t = (T - t)/(T - 1)`, reaching 1 at the first gap step and 0 at the last.
    Endpoint,
    /// `gamma_t = 0.5` everywhere; the no-scaling ablation.
    Flat,
}

impl ScheduleVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            ScheduleVariant::PaperEq1 => "paper-eq1",
            ScheduleVariant::Endpoint => "endpoint",
            ScheduleVariant::Flat => "flat",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            ScheduleVariant::PaperEq1 => 0,
            ScheduleVariant::Endpoint => 1,
            ScheduleVariant::Flat => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ScheduleVariant::PaperEq1),
            1 => Some(ScheduleVariant::Endpoint),
            2 => Some(ScheduleVariant::Flat),
            _ => None,
        }
    }
}

impl fmt::Display for ScheduleVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScheduleVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper-eq1" => Ok(ScheduleVariant::PaperEq1),
            "endpoint" => Ok(ScheduleVariant::Endpoint),
            "flat" => Ok(ScheduleVariant::Flat),
            other => Err(Error::invalid(format!(
                "unknown schedule variant {other:?} (expected paper-eq1, endpoint or flat)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingSchedule {
    gamma: Vector,
    gamma_prime: Vector,
    variant: Option<ScheduleVariant>,
}

impl ScalingSchedule {
    pub fn new(len: usize, variant: ScheduleVariant) -> Result<Self> {
        if len == 0 {
            return Err(Error::invalid("scaling schedule needs a gap length >= 1"));
        }
        let t_len = len as f64;
        let gamma: Vec<f64> = (1..=len)
            .map(|t| {
                if len == 1 {
                    return 0.5;
                }
                let t = t as f64;
                match variant {
                    ScheduleVariant::PaperEq1 => 1.0 - t / t_len,
                    ScheduleVariant::Endpoint => (t_len - t) / (t_len - 1.0),
                    ScheduleVariant::Flat => 0.5,
                }
            })
            .collect();
        let gamma_prime: Vec<f64> = gamma.iter().map(|g| 1.0 - g).collect();
        Ok(ScalingSchedule {
            gamma: Vector::from(gamma),
            gamma_prime: Vector::from(gamma_prime),
            variant: Some(variant),
        })
    }

    /// Arbitrary per-step weights, for ablations and probing. Only lengths
    /// and finiteness are checked; the weights need not sum to one.
    pub fn custom(gamma: Vec<f64>, gamma_prime: Vec<f64>) -> Result<Self> {
        if gamma.is_empty() || gamma.len() != gamma_prime.len() {
            return Err(Error::shape(
                "custom schedule",
                format!("non-empty, equal lengths (gamma has {})", gamma.len()),
                gamma_prime.len(),
            ));
        }
        if gamma.iter().chain(&gamma_prime).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("custom schedule".into()));
        }
        Ok(ScalingSchedule {
            gamma: Vector::from(gamma),
            gamma_prime: Vector::from(gamma_prime),
            variant: None,
        })
    }

    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    /// Zero-based: `gamma(0)` is the weight at the first gap step.
    pub fn gamma(&self, t: usize) -> f64 {
        self.gamma[t]
    }

    pub fn gamma_prime(&self, t: usize) -> f64 {
        self.gamma_prime[t]
    }

    pub fn gammas(&self) -> &[f64] {
        self.gamma.as_slice()
    }

    pub fn gamma_primes(&self) -> &[f64] {
        self.gamma_prime.as_slice()
    }

    /// `None` for custom schedules.
    pub fn variant(&self) -> Option<ScheduleVariant> {
        self.variant
    }

    /// Copy with `gamma[t]` replaced by `value`, leaving `gamma_prime` alone.
    pub fn with_gamma(&self, t: usize, value: f64) -> Self {
        let mut out = self.clone();
        out.gamma[t] = value;
        out.variant = None;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_eq1_four_steps() {
        let s = ScalingSchedule::new(4, ScheduleVariant::PaperEq1).unwrap();
        assert_eq!(s.gammas(), &[0.75, 0.5, 0.25, 0.0]);
        assert_eq!(s.gamma_primes(), &[0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn endpoint_four_steps() {
        let s = ScalingSchedule::new(4, ScheduleVariant::Endpoint).unwrap();
        let expect = [1.0, 2.0 / 3.0, 1.0 / 3.0, 0.0];
        for (g, e) in s.gammas().iter().zip(expect) {
            assert!((g - e).abs() < 1e-15);
        }
    }

    #[test]
    fn single_step_is_symmetric() {
        for v in [
            ScheduleVariant::PaperEq1,
            ScheduleVariant::Endpoint,
            ScheduleVariant::Flat,
        ] {
            let s = ScalingSchedule::new(1, v).unwrap();
            assert_eq!(s.gammas(), &[0.5]);
            assert_eq!(s.gamma_primes(), &[0.5]);
        }
    }

    #[test]
    fn zero_length_rejected() {
        assert!(ScalingSchedule::new(0, ScheduleVariant::PaperEq1).is_err());
    }

    #[test]
    fn variant_names_round_trip() {
        for v in [
            ScheduleVariant::PaperEq1,
            ScheduleVariant::Endpoint,
            ScheduleVariant::Flat,
        ] {
            assert_eq!(v.as_str().parse::<ScheduleVariant>().unwrap(), v);
            assert_eq!(ScheduleVariant::from_code(v.code()), Some(v));
        }
        assert!("linear".parse::<ScheduleVariant>().is_err());
    }

    #[test]
    fn custom_validates() {
        assert!(ScalingSchedule::custom(vec![1.0], vec![]).is_err());
        assert!(ScalingSchedule::custom(vec![f64::NAN], vec![0.0]).is_err());
        let s = ScalingSchedule::custom(vec![2.0, 0.0], vec![0.0, 1.0]).unwrap();
        assert_eq!(s.variant(), None);
    }

    #[test]
    fn invariants_hold_for_many_lengths() {
        for len in 1..=300 {
            for v in [
                ScheduleVariant::PaperEq1,
                ScheduleVariant::Endpoint,
                ScheduleVariant::Flat,
            ] {
                let s = ScalingSchedule::new(len, v).unwrap();
                for t in 0..len {
                    assert!((s.gamma(t) + s.gamma_prime(t) - 1.0).abs() <= 1e-15);
                    assert!((0.0..=1.0).contains(&s.gamma(t)));
                    if t > 0 {
                        assert!(s.gamma(t) <= s.gamma(t - 1));
                        assert!(s.gamma_prime(t) >= s.gamma_prime(t - 1));
                    }
                }
            }
        }
    }
}
