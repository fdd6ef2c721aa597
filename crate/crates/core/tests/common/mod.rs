//! Independent reference implementations and fixtures for the integration
//! and acceptance tests.
//!
//! The oracles here deliberately avoid the library's shortcuts: rankings are
//! computed with explicit pairwise loops and dense matrices, and the online
//! engine is replayed as one blocking loop.

#![allow(dead_code)]

use std::collections::HashMap;

use osfs_core::osfs::{Checkpoint, OsfsResult, Termination};
use osfs_core::ranking::{subset, FeatureSet, RankMethod};
use osfs_core::synth::{generate, LoadPattern, SynthSpec};
use osfs_core::trace::{preprocess, DesignMatrix, DEFAULT_VARIANCE_THRESHOLD};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    osfs_core::seed::rng(seed, 0xAB)
}

/// Scores and order (original indices), best first.
pub struct OracleRanking {
    pub order: Vec<usize>,
    pub scores: Vec<f64>,
}

fn sort_scores(scores: &[f64], descending: bool) -> OracleRanking {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        let c = if descending {
            scores[b].partial_cmp(&scores[a]).unwrap()
        } else {
            scores[a].partial_cmp(&scores[b]).unwrap()
        };
        c.then(a.cmp(&b))
    });
    OracleRanking {
        scores: idx.iter().map(|&i| scores[i]).collect(),
        order: idx,
    }
}

/// Relevance over redundancy with explicit loops over every feature pair.
pub fn arr_oracle(x: &[Vec<f64>]) -> OracleRanking {
    let m = x.len();
    let n = x[0].len();
    let col = |i: usize| -> Vec<f64> { (0..m).map(|r| x[r][i]).collect() };
    let cosim = |a: &[f64], b: &[f64]| -> f64 {
        let mut ab = 0.0;
        let mut aa = 0.0;
        let mut bb = 0.0;
        for r in 0..a.len() {
            ab += a[r] * b[r];
            aa += a[r] * a[r];
            bb += b[r] * b[r];
        }
        if aa == 0.0 || bb == 0.0 {
            0.0
        } else {
            (ab / (aa.sqrt() * bb.sqrt())).abs()
        }
    };
    let mut scores = Vec::with_capacity(n);
    for i in 0..n {
        let ci = col(i);
        let mean = ci.iter().sum::<f64>() / m as f64;
        let relevance: f64 = ci.iter().map(|v| (v - mean).abs()).sum();
        let mut sim_sum = 0.0;
        for j in 0..n {
            sim_sum += cosim(&ci, &col(j));
        }
        let norm: f64 = ci.iter().map(|v| v * v).sum();
        scores.push(if norm == 0.0 { 0.0 } else { relevance / sim_sum });
    }
    sort_scores(&scores, true)
}

pub fn ls_k(m: usize) -> usize {
    if m <= 16 {
        2
    } else if m <= 128 {
        5
    } else {
        10
    }
}

/// Laplacian score with dense S, D and L and explicit quadratic forms.
pub fn ls_oracle(x: &[Vec<f64>]) -> OracleRanking {
    let m = x.len();
    let n = x[0].len();
    let k = ls_k(m);
    let dist = |i: usize, j: usize| -> f64 {
        (0..n).map(|f| (x[i][f] - x[j][f]).powi(2)).sum::<f64>().sqrt()
    };
    let mut adj = vec![vec![false; m]; m];
    for i in 0..m {
        let mut others: Vec<(f64, usize)> = (0..m).filter(|&j| j != i).map(|j| (dist(i, j), j)).collect();
        others.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        for &(_, j) in others.iter().take(k) {
            adj[i][j] = true;
            adj[j][i] = true;
        }
    }
    let mut s = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            if i != j && adj[i][j] {
                s[i][j] = (-dist(i, j).powi(2)).exp();
            }
        }
    }
    let d: Vec<f64> = s.iter().map(|row| row.iter().sum()).collect();
    let mut l = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            l[i][j] = if i == j { d[i] } else { 0.0 } - s[i][j];
        }
    }
    let ones_d_ones: f64 = d.iter().sum();
    let mut scores = Vec::with_capacity(n);
    for f in 0..n {
        let col: Vec<f64> = (0..m).map(|r| x[r][f]).collect();
        if col.iter().all(|&v| v == col[0]) {
            scores.push(f64::INFINITY);
            continue;
        }
        let f_d_one: f64 = (0..m).map(|r| col[r] * d[r]).sum();
        let v: Vec<f64> = col.iter().map(|c| c - f_d_one / ones_d_ones).collect();
        let mut vlv = 0.0;
        for i in 0..m {
            for j in 0..m {
                vlv += v[i] * l[i][j] * v[j];
            }
        }
        let vdv: f64 = (0..m).map(|i| v[i] * d[i] * v[i]).sum();
        scores.push(if vdv == 0.0 { f64::INFINITY } else { vlv / vdv });
    }
    sort_scores(&scores, false)
}

/// Straight-line replay of the blocking algorithm on rows `start..` of
/// `matrix` (1-based start). k values above the feature count are skipped;
/// on exhaustion the last evaluated k is reported with t = 1024.
pub fn blocking_osfs(
    matrix: &DesignMatrix,
    start: usize,
    method: RankMethod,
    eta: f64,
    k_grid: &[usize],
    seed: u64,
) -> OsfsResult {
    const CHECKPOINTS: [usize; 6] = [32, 64, 128, 256, 512, 1024];
    let stream = matrix.rows(start - 1, matrix.n_samples()).unwrap();
    let stream = if method.is_supervised() {
        stream
    } else {
        stream.without_targets()
    };
    let n = stream.n_features();
    let ks: Vec<usize> = k_grid.iter().copied().filter(|&k| k <= n).collect();
    let mut memo: HashMap<(usize, usize), FeatureSet> = HashMap::new();
    let mut sub = |k: usize, t: usize| -> FeatureSet {
        memo.entry((k, t))
            .or_insert_with(|| subset(k, t, method, &stream, seed).unwrap())
            .clone()
    };
    let sim = |a: &FeatureSet, b: &FeatureSet| -> f64 {
        let shared = a.indices().iter().filter(|i| b.contains(**i)).count();
        shared as f64 / a.k() as f64
    };
    let done = |features, k, t_k, by, read, log: &Vec<Checkpoint>| OsfsResult {
        method,
        seed,
        k,
        t_k,
        terminated_by: by,
        samples_read: read,
        features,
        checkpoints: log.clone(),
    };

    let mut read = 0;
    let mut already_read = false;
    let mut log = Vec::new();
    let mut last_f2 = None;
    for &k in &ks {
        if !already_read {
            read = 16;
        }
        let mut f1 = sub(k, 8);
        let mut f2 = sub(k, 16);
        let mut sim12 = sim(&f1, &f2);
        log.push(Checkpoint { k, t: 16, sim: sim12 });
        for t in 17..=1024 {
            if !already_read {
                assert!(t <= stream.n_samples(), "stream ran out");
                read = t;
            }
            if CHECKPOINTS.contains(&t) {
                let ft = sub(k, t);
                let simkt = sim(&f2, &ft);
                log.push(Checkpoint { k, t, sim: simkt });
                if simkt < sim12 && sim12 > eta {
                    return done(f1, k, t / 4, Termination::ADecline, read, &log);
                } else if simkt > eta && t == 1024 {
                    return done(f2, k, t / 2, Termination::BHorizon, read, &log);
                } else {
                    f1 = f2;
                    f2 = ft;
                    sim12 = simkt;
                }
            }
        }
        already_read = true;
        last_f2 = Some((f2, k));
    }
    let (f2, k) = last_f2.unwrap();
    done(f2, k, 1024, Termination::Fallback, read, &log)
}

fn from_rows(rows: Vec<Vec<f64>>, targets: Option<Vec<f64>>) -> DesignMatrix {
    DesignMatrix::from_rows(&rows, targets).unwrap()
}

/// Every feature alternates around 0.5 with its own fixed amplitude, so
/// every even-length prefix ranks features identically. The target follows
/// feature 0.
pub fn stationary(n: usize, m: usize) -> DesignMatrix {
    let amps: Vec<f64> = (0..n).map(|j| 0.1 + 0.8 * (j + 1) as f64 / (n + 1) as f64).collect();
    stationary_with(&amps, m)
}

pub fn stationary_with(amps: &[f64], m: usize) -> DesignMatrix {
    let rows: Vec<Vec<f64>> = (0..m)
        .map(|t| {
            let s = if t % 2 == 0 { 0.5 } else { -0.5 };
            amps.iter().map(|a| 0.5 + s * a).collect()
        })
        .collect();
    let y = rows.iter().map(|r| 1.0 + r[0]).collect();
    from_rows(rows, Some(y))
}

/// Features 0..4 swing widely for the first 16 rows and then go flat, while
/// features 4..8 start quiet and swing hardest afterwards: the top-4 set is
/// the same at 8 and 16 samples and entirely different at 32.
pub fn decline(m: usize) -> DesignMatrix {
    decline_with(0.4, 0.05, 0.5, m)
}

pub fn decline_with(early: f64, quiet: f64, late: f64, m: usize) -> DesignMatrix {
    let rows: Vec<Vec<f64>> = (0..m)
        .map(|t| {
            let s = if t % 2 == 0 { 1.0 } else { -1.0 };
            let (a, b) = if t < 16 { (early, quiet) } else { (0.0, late) };
            let mut r = vec![0.5 + s * a; 4];
            r.extend(vec![0.5 + s * b; 4]);
            r
        })
        .collect();
    let y = rows.iter().map(|r| 1.0 + r[4]).collect();
    from_rows(rows, Some(y))
}

/// Two groups of `g` identical features take turns being active over
/// doubling segments, so the top-k set flips between groups at every
/// checkpoint and no k is ever stable.
pub fn groups(g: usize, m: usize) -> DesignMatrix {
    groups_with(g, 0.3, 0.5, m)
}

pub fn groups_with(g: usize, first: f64, amp: f64, m: usize) -> DesignMatrix {
    // 1-based segment ends alternate A, B, A, B, ...
    let a_active = |t: usize| matches!(t, 1..=8 | 17..=32 | 65..=128 | 257..=512 | 1025..);
    let rows: Vec<Vec<f64>> = (1..=m)
        .map(|t| {
            let s = if t % 2 == 0 { 1.0 } else { -1.0 };
            let a = if t <= 8 { first } else { amp };
            let (va, vb) = if a_active(t) {
                (0.5 + s * a, 0.5)
            } else {
                (0.5, 0.5 + s * amp)
            };
            let mut r = vec![va; g];
            r.extend(vec![vb; g]);
            r
        })
        .collect();
    let y = rows.iter().map(|r| r[0] + r[g]).collect();
    from_rows(rows, Some(y))
}

/// Independent uniform features and target.
pub fn noise(n: usize, m: usize, seed: u64) -> DesignMatrix {
    let mut r = rng(seed);
    let rows: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| r.random::<f64>()).collect()).collect();
    let y = (0..m).map(|_| 1.0 + r.random::<f64>()).collect();
    from_rows(rows, Some(y))
}

/// Preprocessed synthetic trace.
pub fn planted(n: usize, m: usize, sigma: f64, pattern: LoadPattern, seed: u64) -> DesignMatrix {
    let spec = SynthSpec {
        n_features: n,
        m_samples: m,
        n_informative: 5.min(n),
        n_redundant: 10.min(n.saturating_sub(5)),
        noise_sigma: sigma,
        load_pattern: pattern,
        seed,
    };
    preprocess(&generate(&spec).unwrap(), DEFAULT_VARIANCE_THRESHOLD)
        .unwrap()
        .0
}

/// Monte-Carlo mean overlap fraction of two independent uniformly random
/// k-subsets of n items.
pub fn random_overlap(n: usize, k: usize, trials: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let draw = |r: &mut ChaCha8Rng| {
        let mut chosen = Vec::with_capacity(k);
        while chosen.len() < k {
            let v = r.random_range(0..n);
            if !chosen.contains(&v) {
                chosen.push(v);
            }
        }
        chosen
    };
    let mut total = 0.0;
    for _ in 0..trials {
        let a = draw(&mut r);
        let b = draw(&mut r);
        total += a.iter().filter(|v| b.contains(v)).count() as f64 / k as f64;
    }
    total / trials as f64
}
