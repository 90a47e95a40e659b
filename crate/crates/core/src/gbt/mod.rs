//! Gradient-boosted regression trees with a mean-absolute-deviation split
//! gain, k-fold out-of-fold prediction and total-gain feature importance.

pub mod boost;
pub mod cv;
pub mod split;
pub mod tree;

use std::collections::BTreeMap;

use thiserror::Error;

pub use boost::{boost, GbtEnsemble, TreeParams, DEFAULT_LEARNING_RATE};
pub use cv::{cv_predict, fold_assignment, CvConfig, CvResult, Grid};
pub use split::{find_best_split, SplitSpec};
pub use tree::{grow_tree, Node, RegressionTree};

use crate::ranking::FeatureScores;
use crate::temporal::FEATURE_COUNT;

#[derive(Debug, Error)]
pub enum GbtError {
    #[error("no training data")]
    EmptyData,
    #[error("feature matrix has {rows} rows but there are {targets} targets")]
    DimensionMismatch { rows: usize, targets: usize },
    #[error("{n} samples cannot fill {folds} folds")]
    InsufficientData { n: usize, folds: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite value in training data")]
    NonFinite,
    #[error("no ensemble for year {0} contains a split")]
    NoSplits(i32),
    #[error("no ensembles given")]
    NoEnsembles,
}

/// Per-year total split gain per feature, normalised to sum to 1, averaged
/// across years and ranked descending.
pub fn gain_importance(ensembles: &[(i32, &GbtEnsemble)]) -> Result<FeatureScores, GbtError> {
    if ensembles.is_empty() {
        return Err(GbtError::NoEnsembles);
    }
    let mut yearly = BTreeMap::new();
    for &(year, e) in ensembles {
        let totals = e.gain_totals(FEATURE_COUNT);
        let sum: f64 = totals.iter().sum();
        if sum <= 0.0 {
            return Err(GbtError::NoSplits(year));
        }
        let mut scores = [0.0; FEATURE_COUNT];
        for (s, t) in scores.iter_mut().zip(&totals) {
            *s = t / sum;
        }
        yearly.insert(year, scores);
    }
    Ok(FeatureScores::from_yearly(yearly, true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    #[test]
    fn stumps_only_is_an_error() {
        let x = Matrix::from_vec(4, FEATURE_COUNT, vec![1.0; 4 * FEATURE_COUNT]);
        let e = boost(&x, &[1.0, 2.0, 3.0, 4.0], TreeParams { n_trees: 3, max_depth: 2, min_leaf: 1 }, 0.1).unwrap();
        assert!(matches!(gain_importance(&[(2014, &e)]), Err(GbtError::NoSplits(2014))));
    }
}
