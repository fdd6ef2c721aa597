//! Laplacian score on a K-nearest-neighbour sample graph with heat-kernel
//! weights `exp(-d^2)`. Lower scores preserve locality better.

use super::{require_nonempty, RankMethod, RankedFeatureList};
use crate::error::{Error, Result};
use crate::trace::DesignMatrix;

/// Neighbourhood size for a graph over `m` samples.
pub fn ls_neighbours(m: usize) -> usize {
    match m {
        0..=16 => 2,
        17..=128 => 5,
        _ => 10,
    }
}

/// The symmetric kNN graph over the sample rows of a matrix.
#[derive(Debug, Clone)]
pub struct SampleGraph {
    n_nodes: usize,
    k: usize,
    /// `(i, j, w)` with `i < j`, sorted.
    edges: Vec<(usize, usize, f64)>,
    degrees: Vec<f64>,
}

impl SampleGraph {
    pub fn build(matrix: &DesignMatrix) -> Self {
        let m = matrix.n_samples();
        Self::with_neighbours(matrix, ls_neighbours(m))
    }

    pub fn with_neighbours(matrix: &DesignMatrix, k: usize) -> Self {
        let m = matrix.n_samples();
        let dist = SquaredDistances::new(matrix);
        let mut adjacent = vec![false; m * m];
        if m <= k + 1 {
            adjacent.fill(true);
        } else {
            let mut others: Vec<usize> = Vec::with_capacity(m - 1);
            for i in 0..m {
                others.clear();
                others.extend((0..m).filter(|&j| j != i));
                // Equal distances keep the lower sample index first.
                others.select_nth_unstable_by(k - 1, |&a, &b| {
                    dist.get(i, a).total_cmp(&dist.get(i, b)).then(a.cmp(&b))
                });
                for &j in &others[..k] {
                    adjacent[i * m + j] = true;
                    adjacent[j * m + i] = true;
                }
            }
        }
        let mut edges = Vec::new();
        let mut degrees = vec![0.0; m];
        for i in 0..m {
            for j in i + 1..m {
                if adjacent[i * m + j] {
                    let w = (-dist.get(i, j)).exp();
                    edges.push((i, j, w));
                    degrees[i] += w;
                    degrees[j] += w;
                }
            }
        }
        Self {
            n_nodes: m,
            k,
            edges,
            degrees,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn neighbours(&self) -> usize {
        self.k
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// Dense symmetric weight matrix S (zero diagonal).
    pub fn weight_matrix(&self) -> Vec<Vec<f64>> {
        let mut s = vec![vec![0.0; self.n_nodes]; self.n_nodes];
        for &(i, j, w) in &self.edges {
            s[i][j] = w;
            s[j][i] = w;
        }
        s
    }

    /// Dense L = D - S.
    pub fn laplacian(&self) -> Vec<Vec<f64>> {
        let mut l = self.weight_matrix();
        for (i, row) in l.iter_mut().enumerate() {
            for v in row.iter_mut() {
                *v = -*v;
            }
            row[i] = self.degrees[i];
        }
        l
    }

    /// Laplacian score of one feature column (length = node count).
    pub fn score(&self, f: &[f64]) -> f64 {
        let (lo, hi) = f
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if lo == hi {
            return f64::INFINITY;
        }
        let total: f64 = self.degrees.iter().sum();
        let mu = f.iter().zip(&self.degrees).map(|(v, d)| v * d).sum::<f64>() / total;
        let den: f64 = f
            .iter()
            .zip(&self.degrees)
            .map(|(v, d)| d * (v - mu) * (v - mu))
            .sum();
        if den <= 0.0 {
            return f64::INFINITY;
        }
        // V'LV summed over edges; the mean shift cancels in differences.
        let num: f64 = self
            .edges
            .iter()
            .map(|&(i, j, w)| w * (f[i] - f[j]) * (f[i] - f[j]))
            .sum();
        num / den
    }
}

pub fn ls_rank(matrix: &DesignMatrix) -> Result<RankedFeatureList> {
    require_nonempty(matrix, 2)?;
    let graph = SampleGraph::build(matrix);
    if graph.degrees.iter().sum::<f64>() <= 0.0 {
        return Err(Error::DegenerateGraph);
    }
    let scores: Vec<f64> = matrix.columns().iter().map(|c| graph.score(c)).collect();
    Ok(RankedFeatureList::from_scores(
        matrix.feature_ids(),
        &scores,
        RankMethod::Ls,
    ))
}

/// Strict upper triangle of pairwise squared Euclidean distances.
struct SquaredDistances {
    m: usize,
    values: Vec<f64>,
}

impl SquaredDistances {
    fn new(matrix: &DesignMatrix) -> Self {
        let m = matrix.n_samples();
        let n = matrix.n_features();
        let rows: Vec<f64> = (0..m).flat_map(|i| matrix.row(i)).collect();
        let mut values = Vec::with_capacity(m * m.saturating_sub(1) / 2);
        for i in 0..m {
            let a = &rows[i * n..(i + 1) * n];
            for j in i + 1..m {
                let b = &rows[j * n..(j + 1) * n];
                values.push(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum());
            }
        }
        Self { m, values }
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        // offset of row a in the packed triangle
        let start = a * (2 * self.m - a - 1) / 2;
        self.values[start + b - a - 1]
    }
}
