//! Feature ranking back-ends and the `subset` accessor used by the online
//! engine.

mod arr;
mod ls;
mod tb;

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{DesignMatrix, FeatureId};

pub use arr::arr_rank;
pub use ls::{ls_neighbours, ls_rank, SampleGraph};
pub use tb::{tb_rank, TB_TREES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RankMethod {
    #[serde(rename = "ARR")]
    Arr,
    #[serde(rename = "LS")]
    Ls,
    #[serde(rename = "TB")]
    Tb,
}

impl RankMethod {
    pub const ALL: [RankMethod; 3] = [RankMethod::Arr, RankMethod::Ls, RankMethod::Tb];

    pub fn name(self) -> &'static str {
        match self {
            RankMethod::Arr => "ARR",
            RankMethod::Ls => "LS",
            RankMethod::Tb => "TB",
        }
    }

    /// TB is the only method that looks at targets.
    pub fn is_supervised(self) -> bool {
        self == RankMethod::Tb
    }

    /// Whether a better feature has a larger score.
    pub fn higher_is_better(self) -> bool {
        self != RankMethod::Ls
    }
}

impl fmt::Display for RankMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RankMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "arr" => Ok(RankMethod::Arr),
            "ls" => Ok(RankMethod::Ls),
            "tb" => Ok(RankMethod::Tb),
            other => Err(format!("unknown ranking method `{other}` (expected arr, ls or tb)")),
        }
    }
}

/// A permutation of a matrix's features, best first, with aligned scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeatureList {
    pub order: Vec<FeatureId>,
    pub scores: Vec<f64>,
    pub method: RankMethod,
}

impl RankedFeatureList {
    /// Sorts features by score (direction set by `method`), breaking ties by
    /// ascending original index.
    pub fn from_scores(ids: &[FeatureId], scores: &[f64], method: RankMethod) -> Self {
        let mut idx: Vec<usize> = (0..ids.len()).collect();
        idx.sort_by(|&a, &b| {
            let by_score = if method.higher_is_better() {
                scores[b].total_cmp(&scores[a])
            } else {
                scores[a].total_cmp(&scores[b])
            };
            match by_score {
                Ordering::Equal => ids[a].index.cmp(&ids[b].index),
                other => other,
            }
        });
        Self {
            order: idx.iter().map(|&i| ids[i].clone()).collect(),
            scores: idx.iter().map(|&i| scores[i]).collect(),
            method,
        }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn top(&self, k: usize) -> Result<FeatureSet> {
        if k == 0 || k > self.len() {
            return Err(Error::OutOfRange {
                what: "k",
                value: k,
                min: 1,
                max: self.len(),
            });
        }
        FeatureSet::new(self.order[..k].to_vec())
    }

    pub fn truncate(&mut self, k: usize) {
        self.order.truncate(k);
        self.scores.truncate(k);
    }

    /// CSV with columns `rank,feature_index,feature_name,score,method`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rank", "feature_index", "feature_name", "score", "method"])?;
        for (r, (id, score)) in self.order.iter().zip(&self.scores).enumerate() {
            w.write_record([
                (r + 1).to_string(),
                id.index.to_string(),
                id.name.clone(),
                crate::trace::format_value(*score),
                self.method.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A set of k distinct features, kept sorted by original index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureSet {
    members: Vec<FeatureId>,
}

impl FeatureSet {
    pub fn new(mut members: Vec<FeatureId>) -> Result<Self> {
        members.sort();
        members.dedup_by_key(|f| f.index);
        if members.is_empty() {
            return Err(Error::EmptySet);
        }
        Ok(Self { members })
    }

    pub fn k(&self) -> usize {
        self.members.len()
    }

    pub fn members(&self) -> &[FeatureId] {
        &self.members
    }

    pub fn indices(&self) -> Vec<usize> {
        self.members.iter().map(|f| f.index).collect()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.members.binary_search_by_key(&index, |f| f.index).is_ok()
    }

    /// Number of shared features.
    pub fn overlap(&self, other: &FeatureSet) -> usize {
        let (mut i, mut j, mut n) = (0, 0, 0);
        let (a, b) = (&self.members, &other.members);
        while i < a.len() && j < b.len() {
            match a[i].index.cmp(&b[j].index) {
                Ordering::Less => i += 1,
                Ordering::Greater => j += 1,
                Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }
}

/// Ranks every feature of `matrix`. `seed` only matters for TB.
pub fn rank(matrix: &DesignMatrix, method: RankMethod, seed: u64) -> Result<RankedFeatureList> {
    match method {
        RankMethod::Arr => arr_rank(matrix),
        RankMethod::Ls => ls_rank(matrix),
        RankMethod::Tb => tb_rank(matrix, seed),
    }
}

/// Top `k` features by `method` computed on the first `t` samples.
pub fn subset(
    k: usize,
    t: usize,
    method: RankMethod,
    matrix: &DesignMatrix,
    seed: u64,
) -> Result<FeatureSet> {
    let n = matrix.n_features();
    if k == 0 || k > n {
        return Err(Error::OutOfRange {
            what: "k",
            value: k,
            min: 1,
            max: n,
        });
    }
    let prefix = matrix.prefix(t)?;
    rank(&prefix, method, seed)?.top(k)
}

fn require_nonempty(matrix: &DesignMatrix, min_samples: usize) -> Result<()> {
    if matrix.n_features() == 0 || matrix.n_samples() < min_samples {
        return Err(Error::EmptyMatrix { min_samples });
    }
    Ok(())
}
