//! Prediction-error metric, the online and offline evaluation protocols, and
//! the multi-start study runner.
//!
//! The online protocol (NMAE1) trains a forest on the `l` samples that follow
//! the feature-selection window and tests on every later sample. The offline
//! protocol (NMAE2) trains on a seeded random 70% of the trace and tests on
//! the rest; with all features it is the no-selection baseline.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{ForestConfig, RegressionForest};
use crate::osfs::{run_offline, sim, OsfsConfig, Termination};
use crate::ranking::{rank, FeatureSet, RankMethod, RankedFeatureList};
use crate::seed;
use crate::trace::{format_value, DesignMatrix};

/// Training window of the online protocol.
pub const DEFAULT_TRAIN_WINDOW: usize = 1024;
/// Trees in every forest used for prediction.
pub const PREDICTION_TREES: usize = 100;
/// Latest start time the study draws.
pub const MAX_START: usize = 10_000;

const STARTS_STREAM: u64 = 0x5354_4152;
const SPLIT_STREAM: u64 = 0x5350_4c54;
const FOREST_STREAM: u64 = 0x4652_5354;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmaeReport {
    pub nmae: f64,
    pub q: usize,
    pub mean_target: f64,
}

/// Mean absolute error divided by the magnitude of the mean target.
pub fn nmae(y_true: &[f64], y_pred: &[f64]) -> Result<NmaeReport> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch {
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    let q = y_true.len();
    if q == 0 {
        return Err(Error::InsufficientSamples {
            needed: 1,
            available: 0,
        });
    }
    let mean_target = y_true.iter().sum::<f64>() / q as f64;
    if mean_target == 0.0 {
        return Err(Error::ZeroMeanTarget);
    }
    let mae = y_true
        .iter()
        .zip(y_pred)
        .map(|(y, p)| (y - p).abs())
        .sum::<f64>()
        / q as f64;
    Ok(NmaeReport {
        nmae: mae / mean_target.abs(),
        q,
        mean_target,
    })
}

fn fit_and_score(train: &DesignMatrix, test: &DesignMatrix, forest_seed: u64) -> Result<NmaeReport> {
    let forest = RegressionForest::fit(
        train,
        &ForestConfig {
            n_trees: PREDICTION_TREES,
            seed: forest_seed,
            bootstrap: true,
        },
    )?;
    let predicted = forest.predict_matrix(test)?;
    let actual = test.targets().ok_or(Error::MissingTargets)?;
    nmae(actual, &predicted)
}

/// Online protocol for a selection that started at 1-based `start` and
/// returned `t_k`: train on the `l` rows after the selection window, test on
/// every row after that.
pub fn nmae1_protocol(
    matrix: &DesignMatrix,
    start: usize,
    t_k: usize,
    features: &FeatureSet,
    l: usize,
    seed: u64,
) -> Result<NmaeReport> {
    if !matrix.has_targets() {
        return Err(Error::MissingTargets);
    }
    let m = matrix.n_samples();
    let train_start = start.max(1) - 1 + t_k;
    let test_start = train_start + l;
    if start == 0 || l < 2 || test_start >= m {
        return Err(Error::InsufficientSamples {
            needed: test_start + 1,
            available: m,
        });
    }
    let restricted = matrix.select_features(features.members())?;
    let train = restricted.rows(train_start, test_start)?;
    let test = restricted.rows(test_start, m)?;
    fit_and_score(&train, &test, seed::derive(seed, FOREST_STREAM))
}

/// The seeded 70/30 split used by the offline protocol: `(train, test)` row
/// indices.
pub fn split_rows(m: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rows: Vec<usize> = (0..m).collect();
    rows.shuffle(&mut seed::rng(seed, SPLIT_STREAM));
    let test = rows.split_off(m * 7 / 10);
    (rows, test)
}

/// Offline protocol: forest on a seeded 70% of rows, NMAE on the other 30%.
pub fn nmae2_protocol(matrix: &DesignMatrix, features: &FeatureSet, seed: u64) -> Result<NmaeReport> {
    if !matrix.has_targets() {
        return Err(Error::MissingTargets);
    }
    let m = matrix.n_samples();
    if m < 10 {
        return Err(Error::InsufficientSamples {
            needed: 10,
            available: m,
        });
    }
    let restricted = matrix.select_features(features.members())?;
    let (train_rows, test_rows) = split_rows(m, seed);
    let train = restricted.select_rows(&train_rows);
    let test = restricted.select_rows(&test_rows);
    fit_and_score(&train, &test, seed::derive(seed, FOREST_STREAM))
}

/// Every feature of the matrix as one set.
pub fn all_features(matrix: &DesignMatrix) -> Result<FeatureSet> {
    FeatureSet::new(matrix.feature_ids().to_vec())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub method: RankMethod,
    pub n_starts: usize,
    pub seed: u64,
    pub eta: f64,
    pub train_window: usize,
}

impl StudyConfig {
    pub fn new(method: RankMethod, seed: u64) -> Self {
        Self {
            method,
            n_starts: 10,
            seed,
            eta: 0.5,
            train_window: DEFAULT_TRAIN_WINDOW,
        }
    }

    pub fn osfs_config(&self) -> OsfsConfig {
        OsfsConfig::new(self.method)
            .with_eta(self.eta)
            .with_seed(self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartRecord {
    pub start: usize,
    pub k: usize,
    pub t_k: usize,
    pub terminated_by: Termination,
    pub samples_read: usize,
    pub nmae1: f64,
    pub nmae2: f64,
    pub features: FeatureSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub k_mean: f64,
    pub k_std: f64,
    pub tk_mean: f64,
    pub tk_std: f64,
    pub nmae1_mean: f64,
    pub nmae1_std: f64,
    pub nmae2_mean: f64,
    pub nmae2_std: f64,
}

impl Aggregate {
    pub fn from_records(records: &[StartRecord]) -> Self {
        let column = |f: fn(&StartRecord) -> f64| {
            let values: Vec<f64> = records.iter().map(f).collect();
            mean_std(&values)
        };
        let (k_mean, k_std) = column(|r| r.k as f64);
        let (tk_mean, tk_std) = column(|r| r.t_k as f64);
        let (nmae1_mean, nmae1_std) = column(|r| r.nmae1);
        let (nmae2_mean, nmae2_std) = column(|r| r.nmae2);
        Self {
            k_mean,
            k_std,
            tk_mean,
            tk_std,
            nmae1_mean,
            nmae1_std,
            nmae2_mean,
            nmae2_std,
        }
    }
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub method: RankMethod,
    pub seed: u64,
    pub eta: f64,
    pub train_window: usize,
    pub n_features: usize,
    pub n_samples: usize,
    pub per_start: Vec<StartRecord>,
    pub aggregate: Aggregate,
    pub baseline_nmae2: f64,
}

impl ExperimentReport {
    pub fn starts(&self) -> Vec<usize> {
        self.per_start.iter().map(|r| r.start).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One-row summary table with a header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let a = &self.aggregate;
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "Method", "k_mean", "k_std", "tk_mean", "tk_std", "NMAE1_mean", "NMAE1_std",
            "NMAE2_mean", "NMAE2_std", "baseline",
        ])?;
        let mut row = vec![self.method.to_string()];
        row.extend(
            [
                a.k_mean,
                a.k_std,
                a.tk_mean,
                a.tk_std,
                a.nmae1_mean,
                a.nmae1_std,
                a.nmae2_mean,
                a.nmae2_std,
                self.baseline_nmae2,
            ]
            .iter()
            .map(|&v| format_value(v)),
        );
        w.write_record(&row)?;
        w.flush()?;
        Ok(())
    }
}

/// Start time 1 followed by `n_starts - 1` seeded uniform draws from
/// `[2, min(MAX_START, latest)]`.
pub fn draw_starts(n_starts: usize, latest: usize, seed: u64) -> Vec<usize> {
    let hi = latest.min(MAX_START);
    let mut rng = seed::rng(seed, STARTS_STREAM);
    let mut starts = Vec::with_capacity(n_starts);
    if n_starts > 0 {
        starts.push(1);
    }
    for _ in 1..n_starts {
        starts.push(rng.random_range(2..=hi.max(2)));
    }
    starts
}

/// Runs the online engine from several start times, scores each selection
/// with both protocols, and compares with the all-feature baseline.
pub fn run_study(matrix: &DesignMatrix, config: &StudyConfig) -> Result<ExperimentReport> {
    if config.n_starts == 0 {
        return Err(Error::InvalidConfig("at least one start time is needed".into()));
    }
    if !matrix.has_targets() {
        return Err(Error::MissingTargets);
    }
    let osfs = config.osfs_config();
    osfs.validate()?;
    // Every start must leave room for the longest selection, the training
    // window and one test row.
    let window = osfs.horizon() + config.train_window;
    let m = matrix.n_samples();
    let needed = window + 2;
    if m < needed {
        return Err(Error::InsufficientSamples {
            needed,
            available: m,
        });
    }
    let starts = draw_starts(config.n_starts, m - window, config.seed);

    let mut per_start = Vec::with_capacity(starts.len());
    for (i, &start) in starts.iter().enumerate() {
        let result = run_offline(matrix, &osfs, start)?;
        let nmae1 = nmae1_protocol(
            matrix,
            start,
            result.t_k,
            &result.features,
            config.train_window,
            seed::derive(config.seed, i as u64),
        )?;
        let nmae2 = nmae2_protocol(matrix, &result.features, config.seed)?;
        per_start.push(StartRecord {
            start,
            k: result.k,
            t_k: result.t_k,
            terminated_by: result.terminated_by,
            samples_read: result.samples_read,
            nmae1: nmae1.nmae,
            nmae2: nmae2.nmae,
            features: result.features,
        });
    }
    let baseline = nmae2_protocol(matrix, &all_features(matrix)?, config.seed)?;
    Ok(ExperimentReport {
        method: config.method,
        seed: config.seed,
        eta: config.eta,
        train_window: config.train_window,
        n_features: matrix.n_features(),
        n_samples: m,
        aggregate: Aggregate::from_records(&per_start),
        per_start,
        baseline_nmae2: baseline.nmae,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityCell {
    pub k: usize,
    pub t: usize,
    pub mean_sim: f64,
}

/// Mean similarity between the top-k sets on the first `t/2` and first `t`
/// samples after each start time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTable {
    pub method: RankMethod,
    pub starts: Vec<usize>,
    pub cells: Vec<SimilarityCell>,
}

impl SimilarityTable {
    pub fn get(&self, k: usize, t: usize) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.k == k && c.t == t)
            .map(|c| c.mean_sim)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "t", "mean_sim"])?;
        for c in &self.cells {
            w.write_record([c.k.to_string(), c.t.to_string(), format_value(c.mean_sim)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Similarity evolution over `n_starts` start times drawn as in the study.
pub fn similarity_evolution(
    matrix: &DesignMatrix,
    method: RankMethod,
    k_list: &[usize],
    t_list: &[usize],
    n_starts: usize,
    seed: u64,
) -> Result<SimilarityTable> {
    let max_t = t_list.iter().copied().max().unwrap_or(0);
    let m = matrix.n_samples();
    if max_t == 0 || max_t > m {
        return Err(Error::OutOfRange {
            what: "largest t",
            value: max_t,
            min: 2,
            max: m,
        });
    }
    let starts = draw_starts(n_starts, m - max_t + 1, seed);
    similarity_evolution_at(matrix, method, k_list, t_list, &starts, seed)
}

/// Similarity evolution at explicit 1-based start times.
pub fn similarity_evolution_at(
    matrix: &DesignMatrix,
    method: RankMethod,
    k_list: &[usize],
    t_list: &[usize],
    starts: &[usize],
    seed: u64,
) -> Result<SimilarityTable> {
    let m = matrix.n_samples();
    let n = matrix.n_features();
    if starts.is_empty() {
        return Err(Error::InvalidConfig("at least one start time is needed".into()));
    }
    if method.is_supervised() && !matrix.has_targets() {
        return Err(Error::MissingTargets);
    }
    for &k in k_list {
        if k == 0 || k > n {
            return Err(Error::OutOfRange {
                what: "k",
                value: k,
                min: 1,
                max: n,
            });
        }
    }
    for &t in t_list {
        if t < 2 {
            return Err(Error::OutOfRange {
                what: "t",
                value: t,
                min: 2,
                max: m,
            });
        }
    }
    let max_t = t_list.iter().copied().max().unwrap_or(2);
    // unsupervised rankings never need targets, so do not copy them
    let source = if method.is_supervised() {
        matrix.clone()
    } else {
        matrix.without_targets()
    };

    let mut sums = vec![0.0; k_list.len() * t_list.len()];
    for &start in starts {
        if start == 0 || start - 1 + max_t > m {
            return Err(Error::OutOfRange {
                what: "start",
                value: start,
                min: 1,
                max: (m + 1).saturating_sub(max_t),
            });
        }
        let mut rankings: HashMap<usize, RankedFeatureList> = HashMap::new();
        for &t in t_list {
            for w in [t / 2, t] {
                if let Entry::Vacant(slot) = rankings.entry(w) {
                    let rows = source.rows(start - 1, start - 1 + w)?;
                    slot.insert(rank(&rows, method, seed)?);
                }
            }
        }
        for (ki, &k) in k_list.iter().enumerate() {
            for (ti, &t) in t_list.iter().enumerate() {
                let half = rankings[&(t / 2)].top(k)?;
                let full = rankings[&t].top(k)?;
                sums[ki * t_list.len() + ti] += sim(&half, &full)?;
            }
        }
    }
    let mut cells = Vec::with_capacity(sums.len());
    for (ki, &k) in k_list.iter().enumerate() {
        for (ti, &t) in t_list.iter().enumerate() {
            cells.push(SimilarityCell {
                k,
                t,
                mean_sim: sums[ki * t_list.len() + ti] / starts.len() as f64,
            });
        }
    }
    Ok(SimilarityTable {
        method,
        starts: starts.to_vec(),
        cells,
    })
}
