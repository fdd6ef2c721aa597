//! Tree-based ranking: regression-forest impurity importances.

use super::{require_nonempty, RankMethod, RankedFeatureList};
use crate::error::{Error, Result};
use crate::forest::{ForestConfig, RegressionForest};
use crate::trace::DesignMatrix;

pub const TB_TREES: usize = 100;

pub fn tb_rank(matrix: &DesignMatrix, seed: u64) -> Result<RankedFeatureList> {
    if !matrix.has_targets() {
        return Err(Error::MissingTargets);
    }
    require_nonempty(matrix, 2)?;
    let forest = RegressionForest::fit(
        matrix,
        &ForestConfig {
            n_trees: TB_TREES,
            seed,
            ..ForestConfig::default()
        },
    )?;
    Ok(RankedFeatureList::from_scores(
        matrix.feature_ids(),
        forest.importances(),
        RankMethod::Tb,
    ))
}
