//! Synthetic datasets with known generating parameters.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchmarkKind {
    /// `y = 2x + 1` for `x < 0`, `y = -x + 1` otherwise, `x ~ U[-2, 2]`.
    TwoRegime,
    /// Two planes over `(x1, x2)` blended by a logistic gate on `x1`.
    SigmoidBlend,
    /// Two-regime data with an extra independent uniform column.
    IrrelevantDescriptor,
}

impl BenchmarkKind {
    pub const ALL: [BenchmarkKind; 3] = [
        BenchmarkKind::TwoRegime,
        BenchmarkKind::SigmoidBlend,
        BenchmarkKind::IrrelevantDescriptor,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchmarkKind::TwoRegime => "two-regime",
            BenchmarkKind::SigmoidBlend => "sigmoid-blend",
            BenchmarkKind::IrrelevantDescriptor => "irrelevant-descriptor",
        }
    }
}

impl fmt::Display for BenchmarkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchmarkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BenchmarkKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownBenchmark(s.to_string()))
    }
}

/// One affine piece of the generator, over all descriptor columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Regime {
    pub gains: Vec<f64>,
    pub offset: f64,
}

impl Regime {
    pub fn eval(&self, u: &[f64]) -> f64 {
        self.gains.iter().zip(u).map(|(a, x)| a * x).sum::<f64>() + self.offset
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkTruth {
    pub kind: BenchmarkKind,
    pub regimes: Vec<Regime>,
    /// Columns the activity depends on.
    pub relevant_columns: Vec<usize>,
    /// Noise-free activity for every row.
    pub clean_activity: Vec<f64>,
}

impl BenchmarkTruth {
    /// Noise-free value of the generator at `u`.
    pub fn evaluate(&self, u: &[f64]) -> f64 {
        match self.kind {
            BenchmarkKind::TwoRegime | BenchmarkKind::IrrelevantDescriptor => {
                let regime = if u[0] < 0.0 { 0 } else { 1 };
                self.regimes[regime].eval(u)
            }
            BenchmarkKind::SigmoidBlend => {
                let gate = 1.0 / (1.0 + (-4.0 * u[0]).exp());
                (1.0 - gate) * self.regimes[0].eval(u) + gate * self.regimes[1].eval(u)
            }
        }
    }
}

/// Deterministic per `seed`. Descriptors are uniform on [-2, 2]; Gaussian
/// noise with standard deviation `noise_sigma` is added to the activity.
pub fn generate_benchmark(
    kind: BenchmarkKind,
    samples: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<(Dataset, BenchmarkTruth)> {
    if samples == 0 {
        return Err(Error::InvalidConfig("benchmark needs at least one sample".into()));
    }
    if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
        return Err(Error::InvalidConfig(format!("noise sigma must be >= 0, got {noise_sigma}")));
    }
    let (names, regimes, relevant): (Vec<&str>, Vec<Regime>, Vec<usize>) = match kind {
        BenchmarkKind::TwoRegime => (
            vec!["x"],
            vec![
                Regime { gains: vec![2.0], offset: 1.0 },
                Regime { gains: vec![-1.0], offset: 1.0 },
            ],
            vec![0],
        ),
        BenchmarkKind::IrrelevantDescriptor => (
            vec!["x", "irrelevant"],
            vec![
                Regime { gains: vec![2.0, 0.0], offset: 1.0 },
                Regime { gains: vec![-1.0, 0.0], offset: 1.0 },
            ],
            vec![0],
        ),
        BenchmarkKind::SigmoidBlend => (
            vec!["x1", "x2"],
            vec![
                Regime { gains: vec![1.0, 0.5], offset: 1.0 },
                Regime { gains: vec![-0.5, 2.0], offset: -1.0 },
            ],
            vec![0, 1],
        ),
    };
    let width = names.len();
    let mut truth = BenchmarkTruth {
        kind,
        regimes,
        relevant_columns: relevant,
        clean_activity: Vec::with_capacity(samples),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut descriptors = DMatrix::zeros(samples, width);
    let mut activity = DVector::zeros(samples);
    for r in 0..samples {
        let u: Vec<f64> = (0..width).map(|_| rng.random_range(-2.0..=2.0)).collect();
        let clean = truth.evaluate(&u);
        let eps = noise.sample(&mut rng);
        activity[r] = if noise_sigma > 0.0 { clean + eps } else { clean };
        truth.clean_activity.push(clean);
        for (j, x) in u.into_iter().enumerate() {
            descriptors[(r, j)] = x;
        }
    }
    let dataset = Dataset::new(
        descriptors,
        activity,
        names.into_iter().map(String::from).collect(),
    )?;
    Ok((dataset, truth))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_matches_formula() {
        let (ds, _) = generate_benchmark(BenchmarkKind::TwoRegime, 100, 0.0, 11).unwrap();
        for r in 0..ds.len() {
            let x = ds.descriptors()[(r, 0)];
            let expected = if x < 0.0 { 2.0 * x + 1.0 } else { -x + 1.0 };
            assert_eq!(ds.activity()[r], expected);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        for kind in BenchmarkKind::ALL {
            let a = generate_benchmark(kind, 50, 0.1, 3).unwrap();
            let b = generate_benchmark(kind, 50, 0.1, 3).unwrap();
            assert_eq!(a, b);
            let c = generate_benchmark(kind, 50, 0.1, 4).unwrap();
            assert_ne!(a.0, c.0);
        }
    }

    #[test]
    fn irrelevant_column_is_uncorrelated() {
        let (ds, truth) =
            generate_benchmark(BenchmarkKind::IrrelevantDescriptor, 500, 0.05, 5).unwrap();
        assert_eq!(truth.relevant_columns, vec![0]);
        let x = ds.descriptors().column(1).into_owned();
        let y = ds.activity();
        let n = x.len() as f64;
        let (mx, my) = (x.sum() / n, y.sum() / n);
        let cov: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - mx) * (b - my)).sum();
        let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
        assert!((cov / (vx * vy).sqrt()).abs() < 0.2);
    }

    #[test]
    fn kinds_parse() {
        assert_eq!("sigmoid-blend".parse::<BenchmarkKind>().unwrap(), BenchmarkKind::SigmoidBlend);
        assert!(matches!("spiral".parse::<BenchmarkKind>(), Err(Error::UnknownBenchmark(_))));
    }
}
