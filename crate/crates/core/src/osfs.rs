//! The online stable-feature-set engine.
//!
//! For each candidate size k (smallest first) the engine compares the top-k
//! set computed on a window of samples with the set computed on twice as
//! many samples. It stops as soon as the similarity between consecutive sets
//! either drops after having been above `eta` (the earlier set was already
//! stable) or is still above `eta` at the last checkpoint. Otherwise it moves
//! to the next k, replaying the samples it has already stored.
//!
//! [`OsfsState`] is event driven: feed it one sample at a time and it
//! evaluates every checkpoint the stored samples allow.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ranking::{rank, FeatureSet, RankMethod, RankedFeatureList};
use crate::trace::{DesignMatrix, FeatureId, Sample};

/// `|a ∩ b| / k` for two sets of equal size k.
pub fn sim(a: &FeatureSet, b: &FeatureSet) -> Result<f64> {
    if a.k() != b.k() {
        return Err(Error::SizeMismatch {
            left: a.k(),
            right: b.k(),
        });
    }
    if a.k() == 0 {
        return Err(Error::EmptySet);
    }
    Ok(a.overlap(b) as f64 / a.k() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OsfsConfig {
    pub eta: f64,
    pub k_grid: Vec<usize>,
    pub checkpoint_grid: Vec<usize>,
    /// Window sizes of the first two sets computed for every k.
    pub warmup: (usize, usize),
    pub method: RankMethod,
    /// Only used by TB.
    pub seed: u64,
}

impl OsfsConfig {
    pub fn new(method: RankMethod) -> Self {
        Self {
            eta: 0.5,
            k_grid: vec![4, 16, 64, 256],
            checkpoint_grid: vec![32, 64, 128, 256, 512, 1024],
            warmup: (8, 16),
            method,
            seed: 0,
        }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Samples needed before the last checkpoint can be evaluated.
    pub fn horizon(&self) -> usize {
        self.checkpoint_grid.last().copied().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let increasing = |v: &[usize]| v.windows(2).all(|w| w[0] < w[1]);
        let (w1, w2) = self.warmup;
        let problem = if !(self.eta > 0.0 && self.eta < 1.0) {
            Some(format!("eta must lie in (0, 1), got {}", self.eta))
        } else if self.k_grid.is_empty() || self.k_grid[0] == 0 || !increasing(&self.k_grid) {
            Some("k grid must be non-empty, positive and strictly increasing".to_string())
        } else if self.checkpoint_grid.is_empty() || !increasing(&self.checkpoint_grid) {
            Some("checkpoint grid must be non-empty and strictly increasing".to_string())
        } else if !(0 < w1 && w1 < w2 && w2 < self.checkpoint_grid[0]) {
            Some("warm-up windows must be increasing and precede the first checkpoint".to_string())
        } else {
            None
        };
        problem.map_or(Ok(()), |p| Err(Error::InvalidConfig(p)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    /// Similarity dropped after exceeding `eta`: the earlier set is returned.
    #[serde(rename = "A_decline")]
    ADecline,
    /// Similarity still above `eta` at the last checkpoint.
    #[serde(rename = "B_horizon")]
    BHorizon,
    /// No k produced a stable set.
    #[serde(rename = "fallback")]
    Fallback,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::ADecline => "A_decline",
            Termination::BHorizon => "B_horizon",
            Termination::Fallback => "fallback",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub k: usize,
    pub t: usize,
    pub sim: f64,
}

/// `t_k` is the number of samples the returned set was computed from. The
/// engine may have read more than that; see `samples_read`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OsfsResult {
    pub method: RankMethod,
    pub seed: u64,
    pub k: usize,
    pub t_k: usize,
    pub terminated_by: Termination,
    pub samples_read: usize,
    pub features: FeatureSet,
    pub checkpoints: Vec<Checkpoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeedStatus {
    NeedMore,
    Done(OsfsResult),
}

/// Per-k progress: the two most recent sets and the windows they came from.
#[derive(Debug, Clone)]
struct Window {
    f1: FeatureSet,
    t1: usize,
    f2: FeatureSet,
    t2: usize,
    sim12: f64,
    next_checkpoint: usize,
}

#[derive(Debug, Clone)]
pub struct OsfsState {
    config: OsfsConfig,
    k_grid: Vec<usize>,
    feature_ids: Vec<FeatureId>,
    columns: Vec<Vec<f64>>,
    targets: Vec<f64>,
    last_time: Option<usize>,
    k_pos: usize,
    window: Option<Window>,
    rankings: HashMap<usize, RankedFeatureList>,
    log: Vec<Checkpoint>,
    done: bool,
}

impl OsfsState {
    /// Fresh state for a stream whose samples carry values for `feature_ids`
    /// in that order. Sizes in the k grid above the feature count are skipped.
    pub fn new(config: OsfsConfig, feature_ids: Vec<FeatureId>) -> Result<Self> {
        config.validate()?;
        let n = feature_ids.len();
        if n < config.k_grid[0] {
            return Err(Error::InvalidConfig(format!(
                "{n} features is fewer than the smallest k ({})",
                config.k_grid[0]
            )));
        }
        let k_grid = config.k_grid.iter().copied().filter(|&k| k <= n).collect();
        Ok(Self {
            k_grid,
            columns: vec![Vec::new(); n],
            feature_ids,
            config,
            targets: Vec::new(),
            last_time: None,
            k_pos: 0,
            window: None,
            rankings: HashMap::new(),
            log: Vec::new(),
            done: false,
        })
    }

    pub fn config(&self) -> &OsfsConfig {
        &self.config
    }

    pub fn samples_stored(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Checkpoints evaluated so far.
    pub fn checkpoints(&self) -> &[Checkpoint] {
        &self.log
    }

    pub fn feed(&mut self, sample: &Sample) -> Result<FeedStatus> {
        if self.done {
            return Err(Error::FedAfterDone);
        }
        if sample.values.len() != self.columns.len() {
            return Err(Error::DimensionMismatch {
                expected: self.columns.len(),
                found: sample.values.len(),
            });
        }
        if let Some(previous) = self.last_time {
            if sample.time_index <= previous {
                return Err(Error::OutOfOrderSample {
                    previous,
                    found: sample.time_index,
                });
            }
        }
        if self.config.method.is_supervised() {
            let y = sample.target.ok_or(Error::MissingTargets)?;
            self.targets.push(y);
        }
        self.last_time = Some(sample.time_index);
        for (c, &v) in self.columns.iter_mut().zip(&sample.values) {
            c.push(v);
        }
        self.advance()
    }

    /// Evaluates everything the stored samples allow.
    fn advance(&mut self) -> Result<FeedStatus> {
        let stored = self.samples_stored();
        loop {
            let k = self.k_grid[self.k_pos];
            if self.window.is_none() {
                let (w1, w2) = self.config.warmup;
                if stored < w2 {
                    return Ok(FeedStatus::NeedMore);
                }
                let f1 = self.top(k, w1)?;
                let f2 = self.top(k, w2)?;
                let sim12 = sim(&f1, &f2)?;
                self.log.push(Checkpoint { k, t: w2, sim: sim12 });
                self.window = Some(Window {
                    f1,
                    t1: w1,
                    f2,
                    t2: w2,
                    sim12,
                    next_checkpoint: 0,
                });
            }
            let horizon = self.config.horizon();
            while let Some(&t) = self
                .window
                .as_ref()
                .and_then(|w| self.config.checkpoint_grid.get(w.next_checkpoint))
            {
                if stored < t {
                    return Ok(FeedStatus::NeedMore);
                }
                let ft = self.top(k, t)?;
                let eta = self.config.eta;
                let w = self.window.as_mut().expect("window initialised above");
                let sim_t = sim(&w.f2, &ft)?;
                self.log.push(Checkpoint { k, t, sim: sim_t });
                if sim_t < w.sim12 && w.sim12 > eta {
                    let (f, t_k) = (w.f1.clone(), w.t1);
                    return Ok(self.finish(f, k, t_k, Termination::ADecline));
                }
                if sim_t > eta && t == horizon {
                    let (f, t_k) = (w.f2.clone(), w.t2);
                    return Ok(self.finish(f, k, t_k, Termination::BHorizon));
                }
                w.f1 = std::mem::replace(&mut w.f2, ft);
                w.t1 = w.t2;
                w.t2 = t;
                w.sim12 = sim_t;
                w.next_checkpoint += 1;
            }
            if self.k_pos + 1 == self.k_grid.len() {
                let w = self.window.take().expect("window initialised above");
                return Ok(self.finish(w.f2, k, w.t2, Termination::Fallback));
            }
            self.k_pos += 1;
            self.window = None;
        }
    }

    /// Top-k of the ranking computed on the first `t` stored samples.
    fn top(&mut self, k: usize, t: usize) -> Result<FeatureSet> {
        if !self.rankings.contains_key(&t) {
            let columns = self.columns.iter().map(|c| c[..t].to_vec()).collect();
            let targets = self
                .config
                .method
                .is_supervised()
                .then(|| self.targets[..t].to_vec());
            let prefix = DesignMatrix::new(columns, self.feature_ids.clone(), targets)?;
            let ranking = rank(&prefix, self.config.method, self.config.seed)?;
            self.rankings.insert(t, ranking);
        }
        self.rankings[&t].top(k)
    }

    fn finish(&mut self, features: FeatureSet, k: usize, t_k: usize, by: Termination) -> FeedStatus {
        self.done = true;
        FeedStatus::Done(OsfsResult {
            method: self.config.method,
            seed: self.config.seed,
            k,
            t_k,
            terminated_by: by,
            samples_read: self.samples_stored(),
            features,
            checkpoints: std::mem::take(&mut self.log),
        })
    }
}

/// Streams rows `start, start + 1, ...` (1-based) of `matrix` into a fresh
/// engine until it returns. Targets are only handed over for TB.
pub fn run_offline(matrix: &DesignMatrix, config: &OsfsConfig, start: usize) -> Result<OsfsResult> {
    let m = matrix.n_samples();
    let min_read = config.checkpoint_grid.first().copied().unwrap_or(0);
    if start == 0 || start - 1 + min_read > m {
        return Err(Error::InsufficientSamples {
            needed: start.max(1) - 1 + min_read,
            available: m,
        });
    }
    if config.method.is_supervised() && !matrix.has_targets() {
        return Err(Error::MissingTargets);
    }
    let mut state = OsfsState::new(config.clone(), matrix.feature_ids().to_vec())?;
    let with_target = config.method.is_supervised();
    for row in start - 1..m {
        if let FeedStatus::Done(result) = state.feed(&matrix.sample(row, with_target))? {
            return Ok(result);
        }
    }
    Err(Error::InsufficientSamples {
        needed: start - 1 + config.horizon(),
        available: m,
    })
}
