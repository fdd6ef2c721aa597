//! Relevance over redundancy: mean-absolute-deviation relevance divided by
//! the summed absolute cosine similarity to every feature (itself included).

use super::{require_nonempty, RankMethod, RankedFeatureList};
use crate::error::Result;
use crate::trace::DesignMatrix;

pub fn arr_rank(matrix: &DesignMatrix) -> Result<RankedFeatureList> {
    require_nonempty(matrix, 1)?;
    let scores = arr_scores(matrix);
    Ok(RankedFeatureList::from_scores(
        matrix.feature_ids(),
        &scores,
        RankMethod::Arr,
    ))
}

pub(crate) fn arr_scores(matrix: &DesignMatrix) -> Vec<f64> {
    let m = matrix.n_samples();
    let cols = matrix.columns();

    let relevance: Vec<f64> = cols
        .iter()
        .map(|c| {
            let mean = c.iter().sum::<f64>() / m as f64;
            c.iter().map(|v| (v - mean).abs()).sum()
        })
        .collect();

    // Unit vectors; zero columns stay zero and so contribute no similarity.
    let units: Vec<Option<Vec<f64>>> = cols
        .iter()
        .map(|c| {
            let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            (norm > 0.0).then(|| c.iter().map(|v| v / norm).collect())
        })
        .collect();

    let sim_sum = if cols.iter().all(|c| c.iter().all(|&v| v >= 0.0)) {
        // Non-negative data has non-negative cosines, so the sum of |cos|
        // collapses to one dot product with the sum of all unit vectors.
        let mut total = vec![0.0; m];
        for u in units.iter().flatten() {
            for (t, v) in total.iter_mut().zip(u) {
                *t += v;
            }
        }
        units
            .iter()
            .map(|u| u.as_ref().map_or(0.0, |u| dot(u, &total)))
            .collect::<Vec<_>>()
    } else {
        units
            .iter()
            .map(|ui| {
                let Some(ui) = ui else { return 0.0 };
                units.iter().flatten().map(|uj| dot(ui, uj).abs()).sum()
            })
            .collect()
    };

    relevance
        .iter()
        .zip(&units)
        .zip(&sim_sum)
        .map(|((&rel, u), &s)| if u.is_some() && s > 0.0 { rel / s } else { 0.0 })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
