//! Synthetic traces with planted ground truth.
//!
//! A latent load curve (periodic or flash-crowd) drives the informative
//! features through distinct monotone maps; each informative feature also
//! carries a private slowly varying component. Redundant features are noisy
//! copies of informative ones, and the remaining nuisance features are
//! independent white noise or slowly mean-reverting walks. The target is a
//! fixed nonlinear function of the informative features.
//!
//! Columns are named `inf{i}`, `red{r}`, `rw{q}` and `wn{q}` and appear in a
//! seeded random order; the target column is `y`.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::trace::{DesignMatrix, FeatureId};

pub const TARGET_NAME: &str = "y";

/// Weight of the private component of each informative feature.
const PRIVATE_WEIGHT: f64 = 0.15;
const PRIVATE_PHI: f64 = 0.9;
const WALK_PHI: f64 = 0.98;
/// One nuisance feature in this many is a walk, the rest white noise.
const WALK_EVERY: usize = 10;
/// Flash-crowd event shape in seconds.
const RAMP: f64 = 60.0;
const HOLD: f64 = 60.0;
const DECAY: f64 = 240.0;

const LOAD_STREAM: u64 = 1;
const TARGET_STREAM: u64 = 2;
const ORDER_STREAM: u64 = 3;
const INFORMATIVE_STREAM: u64 = 1 << 20;
const REDUNDANT_STREAM: u64 = 2 << 20;
const NUISANCE_STREAM: u64 = 3 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LoadPattern {
    /// Sinusoidal load `base + amplitude * sin(2 pi t / period)`.
    Periodic {
        period: f64,
        amplitude: f64,
        base: f64,
    },
    /// Background load `base` with sudden events: Poisson arrivals at
    /// `event_rate` per hour, each ramping to `peak` within a minute.
    FlashCrowd {
        event_rate: f64,
        base: f64,
        peak: f64,
    },
}

impl LoadPattern {
    pub fn periodic() -> Self {
        LoadPattern::Periodic {
            period: 200.0,
            amplitude: 800.0,
            base: 1000.0,
        }
    }

    pub fn flash_crowd() -> Self {
        LoadPattern::FlashCrowd {
            event_rate: 10.0,
            base: 200.0,
            peak: 1800.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_features: usize,
    pub m_samples: usize,
    pub n_informative: usize,
    pub n_redundant: usize,
    pub noise_sigma: f64,
    pub load_pattern: LoadPattern,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_features: 100,
            m_samples: 4096,
            n_informative: 5,
            n_redundant: 10,
            noise_sigma: 0.05,
            load_pattern: LoadPattern::periodic(),
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.n_informative == 0 {
            return bad("at least one informative feature is required".into());
        }
        if self.n_informative + self.n_redundant > self.n_features {
            return bad(format!(
                "{} informative + {} redundant features exceed n_features = {}",
                self.n_informative, self.n_redundant, self.n_features
            ));
        }
        if self.m_samples < 64 {
            return bad(format!("m_samples must be at least 64, got {}", self.m_samples));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma must be finite and >= 0, got {}", self.noise_sigma));
        }
        match self.load_pattern {
            LoadPattern::Periodic {
                period,
                amplitude,
                base,
            } => {
                if !(period > 0.0 && amplitude >= 0.0 && base.is_finite() && amplitude.is_finite()) {
                    return bad("periodic load needs period > 0 and amplitude >= 0".into());
                }
            }
            LoadPattern::FlashCrowd {
                event_rate,
                base,
                peak,
            } => {
                if !(event_rate > 0.0 && event_rate.is_finite() && peak >= base && base.is_finite())
                {
                    return bad("flash-crowd load needs event_rate > 0 and peak >= base".into());
                }
            }
        }
        Ok(())
    }
}

/// The raw load curve, one value per second.
pub fn load_curve(spec: &SynthSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let level = normalized_load(spec);
    Ok(match spec.load_pattern {
        LoadPattern::Periodic {
            amplitude, base, ..
        } => level.iter().map(|l| base - amplitude + 2.0 * amplitude * l).collect(),
        LoadPattern::FlashCrowd { base, peak, .. } => {
            level.iter().map(|l| base + (peak - base) * l).collect()
        }
    })
}

/// Load mapped onto [0, 1].
fn normalized_load(spec: &SynthSpec) -> Vec<f64> {
    let m = spec.m_samples;
    match spec.load_pattern {
        LoadPattern::Periodic { period, .. } => (0..m)
            .map(|t| 0.5 + 0.5 * (2.0 * PI * t as f64 / period).sin())
            .collect(),
        LoadPattern::FlashCrowd { event_rate, .. } => {
            let mut rng = seed::rng(spec.seed, LOAD_STREAM);
            let gaps = Exp::new(event_rate / 3600.0).expect("rate validated positive");
            let mut level = vec![0.0f64; m];
            let mut onset = gaps.sample(&mut rng);
            while onset < m as f64 {
                let first = onset.ceil() as usize;
                let last = ((onset + RAMP + HOLD + DECAY).ceil() as usize).min(m);
                for (t, slot) in level.iter_mut().enumerate().take(last).skip(first) {
                    *slot = slot.max(event_profile(t as f64 - onset));
                }
                onset += gaps.sample(&mut rng);
            }
            level
        }
    }
}

/// Ramp to 1 over a minute, hold, then decay linearly.
fn event_profile(dt: f64) -> f64 {
    if dt < 0.0 {
        0.0
    } else if dt < RAMP {
        dt / RAMP
    } else if dt < RAMP + HOLD {
        1.0
    } else if dt < RAMP + HOLD + DECAY {
        1.0 - (dt - RAMP - HOLD) / DECAY
    } else {
        0.0
    }
}

/// Increasing maps of [0, 1] onto [0, 1], one per informative feature.
fn monotone_map(i: usize, l: f64) -> f64 {
    match i % 7 {
        0 => l.sqrt(),
        1 => l,
        2 => l.powf(1.5),
        3 => l * l,
        4 => l * l * l,
        5 => (1.0 + 9.0 * l).log10(),
        _ => (1.0 - (-3.0 * l).exp()) / (1.0 - (-3.0f64).exp()),
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Stationary AR(1) series with unit variance.
fn ar1(rng: &mut ChaCha8Rng, m: usize, phi: f64) -> Vec<f64> {
    let scale = (1.0 - phi * phi).sqrt();
    let mut x = Vec::with_capacity(m);
    let mut prev = normal(rng);
    for _ in 0..m {
        x.push(prev);
        prev = phi * prev + scale * normal(rng);
    }
    x
}

/// Random positive scale and offset so raw columns do not share units.
fn affine(rng: &mut ChaCha8Rng, values: &mut [f64]) {
    let scale = 10f64.powf(rng.random_range(-1.0..3.0));
    let offset = rng.random_range(0.0..100.0);
    for v in values {
        *v = offset + scale * *v;
    }
}

/// Generates a raw (unscaled) trace with targets.
pub fn generate(spec: &SynthSpec) -> Result<DesignMatrix> {
    spec.validate()?;
    let m = spec.m_samples;
    let sigma = spec.noise_sigma;
    let level = normalized_load(spec);

    let mut columns: Vec<(String, Vec<f64>)> = Vec::with_capacity(spec.n_features);
    let mut informative = Vec::with_capacity(spec.n_informative);
    for i in 0..spec.n_informative {
        let mut rng = seed::rng(spec.seed, INFORMATIVE_STREAM + i as u64);
        let private = ar1(&mut rng, m, PRIVATE_PHI);
        let u: Vec<f64> = (0..m)
            .map(|t| monotone_map(i, level[t]) + PRIVATE_WEIGHT * private[t] + sigma * normal(&mut rng))
            .collect();
        let mut raw = u.clone();
        affine(&mut rng, &mut raw);
        informative.push(u);
        columns.push((format!("inf{i}"), raw));
    }
    for r in 0..spec.n_redundant {
        let mut rng = seed::rng(spec.seed, REDUNDANT_STREAM + r as u64);
        let source = &informative[r % spec.n_informative];
        let mut raw: Vec<f64> = source
            .iter()
            .map(|u| u + (sigma + 0.05) * normal(&mut rng))
            .collect();
        affine(&mut rng, &mut raw);
        columns.push((format!("red{r}"), raw));
    }
    let n_nuisance = spec.n_features - spec.n_informative - spec.n_redundant;
    let (mut walks, mut whites) = (0, 0);
    for q in 0..n_nuisance {
        let mut rng = seed::rng(spec.seed, NUISANCE_STREAM + q as u64);
        let (name, mut raw) = if q % WALK_EVERY == WALK_EVERY - 1 {
            walks += 1;
            (format!("rw{}", walks - 1), ar1(&mut rng, m, WALK_PHI))
        } else {
            whites += 1;
            (format!("wn{}", whites - 1), (0..m).map(|_| normal(&mut rng)).collect())
        };
        affine(&mut rng, &mut raw);
        columns.push((name, raw));
    }

    let mut rng = seed::rng(spec.seed, TARGET_STREAM);
    let k = spec.n_informative as f64;
    let y: Vec<f64> = (0..m)
        .map(|t| {
            let signal: f64 = informative.iter().map(|u| u[t] + 0.5 * u[t] * u[t]).sum();
            1.0 + signal / k + sigma * normal(&mut rng)
        })
        .collect();

    columns.shuffle(&mut seed::rng(spec.seed, ORDER_STREAM));
    let ids = columns
        .iter()
        .enumerate()
        .map(|(j, (name, _))| FeatureId::new(j, name.clone()))
        .collect();
    let data = columns.into_iter().map(|(_, c)| c).collect();
    DesignMatrix::new(data, ids, Some(y))
}

/// The planted informative features still present in `matrix`.
pub fn planted_informative(matrix: &DesignMatrix) -> Vec<FeatureId> {
    planted_with_prefix(matrix, "inf")
}

/// The planted redundant copies still present in `matrix`.
pub fn planted_redundant(matrix: &DesignMatrix) -> Vec<FeatureId> {
    planted_with_prefix(matrix, "red")
}

/// True for names of features unrelated to the target.
pub fn is_nuisance(name: &str) -> bool {
    name.starts_with("rw") || name.starts_with("wn")
}

fn planted_with_prefix(matrix: &DesignMatrix, prefix: &str) -> Vec<FeatureId> {
    matrix
        .feature_ids()
        .iter()
        .filter(|f| {
            f.name
                .strip_prefix(prefix)
                .is_some_and(|rest| rest.parse::<usize>().is_ok())
        })
        .cloned()
        .collect()
}
