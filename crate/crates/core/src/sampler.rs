//! Categorical sampling over label rows: Gumbel-Max, its temperature
//! relaxation, plain inverse-CDF draws and a uniform baseline.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Clamp applied to uniforms before the double logarithm.
pub const UNIFORM_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplerError {
    #[error("empty probability row")]
    Empty,
    #[error("probability row has no positive mass")]
    NoMass,
    #[error("invalid probability {0}")]
    InvalidProbability(f64),
    #[error("temperature must be positive and finite, got {0}")]
    InvalidTemperature(f64),
    #[error("noise has {noise} entries for {classes} classes")]
    NoiseLength { noise: usize, classes: usize },
    #[error("unknown sampling mode {0:?}")]
    UnknownMode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    /// Hard sample taken as the argmax of the relaxed row.
    #[serde(rename = "gumbel")]
    GumbelSoftmax,
    Multinomial,
    /// Uniform over the classes with positive probability.
    Random,
}

impl SamplingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SamplingMode::GumbelSoftmax => "gumbel",
            SamplingMode::Multinomial => "multinomial",
            SamplingMode::Random => "random",
        }
    }
}

impl fmt::Display for SamplingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SamplingMode {
    type Err = SamplerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gumbel" | "gumbel_softmax" | "gumbel-softmax" => Ok(SamplingMode::GumbelSoftmax),
            "multinomial" => Ok(SamplingMode::Multinomial),
            "random" => Ok(SamplingMode::Random),
            _ => Err(SamplerError::UnknownMode(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub mode: SamplingMode,
    pub tau: f64,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            mode: SamplingMode::GumbelSoftmax,
            tau: 1.0,
            seed: 0,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        check_tau(self.tau)
    }
}

fn check_tau(tau: f64) -> Result<(), SamplerError> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(SamplerError::InvalidTemperature(tau))
    }
}

/// Standard Gumbel variates, one per class.
#[derive(Debug, Clone, PartialEq)]
pub struct GumbelNoise(pub Vec<f64>);

pub fn gumbel_from_uniform(u: f64) -> f64 {
    let u = u.clamp(UNIFORM_EPS, 1.0 - UNIFORM_EPS);
    -(-u.ln()).ln()
}

pub fn sample_gumbel<R: Rng + ?Sized>(count: usize, rng: &mut R) -> GumbelNoise {
    GumbelNoise((0..count).map(|_| gumbel_from_uniform(rng.gen::<f64>())).collect())
}

/// Normalizes the row and takes logs; zero mass maps to `-inf`.
fn log_probs(probs: &[f64]) -> Result<Vec<f64>, SamplerError> {
    if probs.is_empty() {
        return Err(SamplerError::Empty);
    }
    if let Some(&p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
        return Err(SamplerError::InvalidProbability(p));
    }
    let total: f64 = probs.iter().sum();
    if total <= 0.0 {
        return Err(SamplerError::NoMass);
    }
    Ok(probs
        .iter()
        .map(|&p| if p > 0.0 { (p / total).ln() } else { f64::NEG_INFINITY })
        .collect())
}

fn check_noise(noise: &GumbelNoise, classes: usize) -> Result<(), SamplerError> {
    if noise.0.len() == classes {
        Ok(())
    } else {
        Err(SamplerError::NoiseLength {
            noise: noise.0.len(),
            classes,
        })
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn gumbel_max_with_noise(probs: &[f64], noise: &GumbelNoise) -> Result<usize, SamplerError> {
    let lp = log_probs(probs)?;
    check_noise(noise, lp.len())?;
    let scores: Vec<f64> = lp.iter().zip(&noise.0).map(|(l, g)| l + g).collect();
    Ok(argmax(&scores))
}

pub fn gumbel_max<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> Result<usize, SamplerError> {
    let noise = sample_gumbel(probs.len(), rng);
    gumbel_max_with_noise(probs, &noise)
}

pub fn gumbel_softmax_with_noise(probs: &[f64], tau: f64, noise: &GumbelNoise) -> Result<Vec<f64>, SamplerError> {
    check_tau(tau)?;
    let lp = log_probs(probs)?;
    check_noise(noise, lp.len())?;
    let z: Vec<f64> = lp.iter().zip(&noise.0).map(|(l, g)| (l + g) / tau).collect();
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = e.iter().sum();
    Ok(e.into_iter().map(|v| v / sum).collect())
}

pub fn gumbel_softmax<R: Rng + ?Sized>(probs: &[f64], tau: f64, rng: &mut R) -> Result<Vec<f64>, SamplerError> {
    let noise = sample_gumbel(probs.len(), rng);
    gumbel_softmax_with_noise(probs, tau, &noise)
}

/// Inverse-CDF categorical draw.
pub fn sample_multinomial<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> Result<usize, SamplerError> {
    log_probs(probs)?;
    let total: f64 = probs.iter().sum();
    let u = rng.gen::<f64>() * total;
    let mut cum = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            cum += p;
            last = i;
            if u < cum {
                return Ok(i);
            }
        }
    }
    Ok(last)
}

/// Uniform draw over the classes with positive probability.
pub fn sample_uniform<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> Result<usize, SamplerError> {
    log_probs(probs)?;
    let support: Vec<usize> = (0..probs.len()).filter(|&i| probs[i] > 0.0).collect();
    Ok(support[rng.gen_range(0..support.len())])
}

pub fn sample_label<R: Rng + ?Sized>(probs: &[f64], config: &SamplingConfig, rng: &mut R) -> Result<usize, SamplerError> {
    match config.mode {
        SamplingMode::GumbelSoftmax => Ok(argmax(&gumbel_softmax(probs, config.tau, rng)?)),
        SamplingMode::Multinomial => sample_multinomial(probs, rng),
        SamplingMode::Random => sample_uniform(probs, rng),
    }
}
