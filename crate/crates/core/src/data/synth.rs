use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numerics::Rng;

use super::csv::SeriesTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    /// `sin(2π i / period)`.
    Sine,
    /// Three sinusoids at `period`, `period / 2.7` and `3.1 · period` with
    /// amplitudes 1, 0.5, 0.3; the two minor components get seeded phases.
    SumOfSines,
    /// Cumulative sum of `N(0, noise_std²)` increments starting from 0.
    RandomWalk,
}

impl SynthKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SynthKind::Sine => "sine",
            SynthKind::SumOfSines => "sum-of-sines",
            SynthKind::RandomWalk => "random-walk",
        }
    }
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sine" => Ok(SynthKind::Sine),
            "sum-of-sines" => Ok(SynthKind::SumOfSines),
            "random-walk" => Ok(SynthKind::RandomWalk),
            other => Err(Error::invalid(format!(
                "unknown series kind {other:?} (expected sine, sum-of-sines or random-walk)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub n: usize,
    pub noise_std: f64,
    pub period: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            kind: SynthKind::Sine,
            n: 1000,
            noise_std: 0.0,
            period: 24.0,
            seed: 0,
        }
    }
}

/// Deterministic single-column series named `value`. For the periodic kinds
/// `noise_std` adds i.i.d. Gaussian noise to each sample.
pub fn synth(spec: &SynthSpec) -> Result<SeriesTable> {
    if spec.n == 0 {
        return Err(Error::invalid("synthetic series needs n >= 1"));
    }
    if !(spec.noise_std >= 0.0 && spec.noise_std.is_finite()) {
        return Err(Error::invalid(format!(
            "noise_std must be >= 0, got {}",
            spec.noise_std
        )));
    }
    if !(spec.period > 0.0 && spec.period.is_finite()) {
        return Err(Error::invalid(format!("period must be > 0, got {}", spec.period)));
    }
    let mut rng = Rng::new(spec.seed);
    let p = spec.period;
    let values: Vec<f64> = match spec.kind {
        SynthKind::Sine => (0..spec.n)
            .map(|i| (2.0 * PI * i as f64 / p).sin() + noise(&mut rng, spec.noise_std))
            .collect(),
        SynthKind::SumOfSines => {
            let phase1 = rng.uniform(0.0, 2.0 * PI);
            let phase2 = rng.uniform(0.0, 2.0 * PI);
            (0..spec.n)
                .map(|i| {
                    let x = 2.0 * PI * i as f64;
                    (x / p).sin()
                        + 0.5 * (x * 2.7 / p + phase1).sin()
                        + 0.3 * (x / (3.1 * p) + phase2).sin()
                        + noise(&mut rng, spec.noise_std)
                })
                .collect()
        }
        SynthKind::RandomWalk => {
            let mut level = 0.0;
            (0..spec.n)
                .map(|i| {
                    if i > 0 {
                        level += spec.noise_std * rng.normal();
                    }
                    level
                })
                .collect()
        }
    };
    SeriesTable::from_columns(vec!["value".to_string()], vec![values])
}

fn noise(rng: &mut Rng, std: f64) -> f64 {
    if std == 0.0 {
        0.0
    } else {
        std * rng.normal()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_sine_cycles() {
        let t = synth(&SynthSpec {
            kind: SynthKind::Sine,
            n: 8,
            period: 4.0,
            ..SynthSpec::default()
        })
        .unwrap();
        let expect = [0.0, 1.0, 0.0, -1.0, 0.0, 1.0, 0.0, -1.0];
        for (v, e) in t.column(0).iter().zip(expect) {
            assert!((v - e).abs() < 1e-15, "{v} vs {e}");
        }
    }

    #[test]
    fn same_seed_same_table() {
        for kind in [SynthKind::Sine, SynthKind::SumOfSines, SynthKind::RandomWalk] {
            let spec = SynthSpec {
                kind,
                n: 500,
                noise_std: 0.1,
                seed: 9,
                ..SynthSpec::default()
            };
            assert_eq!(synth(&spec).unwrap(), synth(&spec).unwrap());
            let other = SynthSpec { seed: 10, ..spec };
            assert_ne!(synth(&spec).unwrap(), synth(&other).unwrap());
        }
    }

    #[test]
    fn random_walk_increment_std() {
        let t = synth(&SynthSpec {
            kind: SynthKind::RandomWalk,
            n: 100_000,
            noise_std: 0.5,
            seed: 3,
            ..SynthSpec::default()
        })
        .unwrap();
        let inc: Vec<f64> = t.column(0).windows(2).map(|w| w[1] - w[0]).collect();
        let n = inc.len() as f64;
        let mean = inc.iter().sum::<f64>() / n;
        let sd = (inc.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((sd - 0.5).abs() < 0.05, "sample std {sd}");
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(synth(&SynthSpec {
            n: 0,
            ..SynthSpec::default()
        })
        .is_err());
        assert!(synth(&SynthSpec {
            noise_std: -1.0,
            ..SynthSpec::default()
        })
        .is_err());
        assert!(synth(&SynthSpec {
            period: 0.0,
            ..SynthSpec::default()
        })
        .is_err());
        assert!("square".parse::<SynthKind>().is_err());
    }
}
