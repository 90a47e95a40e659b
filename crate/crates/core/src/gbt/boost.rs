//! Residual boosting of mean-leaf regression trees.

use serde::{Deserialize, Serialize};

use super::tree::{columns_of, grow_from_columns, RegressionTree};
use super::GbtError;
use crate::linalg::Matrix;
use crate::par;

pub const DEFAULT_LEARNING_RATE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TreeParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtEnsemble {
    pub base_prediction: f64,
    pub learning_rate: f64,
    pub params: TreeParams,
    pub trees: Vec<RegressionTree>,
}

impl GbtEnsemble {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.predict_row_prefix(row, self.trees.len())
    }

    /// Prediction using only the first `k` trees.
    pub fn predict_row_prefix(&self, row: &[f64], k: usize) -> f64 {
        let sum: f64 = self.trees[..k].iter().map(|t| t.predict(row)).sum();
        self.base_prediction + self.learning_rate * sum
    }

    pub fn predict(&self, features: &Matrix) -> Vec<f64> {
        par::map_range(features.rows(), |i| self.predict_row(features.row(i)))
    }

    /// Predictions after each tree count in `stages` (each `<= trees.len()`).
    pub fn predict_staged(&self, features: &Matrix, stages: &[usize]) -> Vec<Vec<f64>> {
        let rows = par::map_range(features.rows(), |i| {
            let row = features.row(i);
            let mut sum = 0.0;
            let mut done = 0;
            let mut sorted: Vec<(usize, usize)> = stages.iter().copied().enumerate().collect();
            sorted.sort_by_key(|s| s.1);
            let mut vals = vec![0.0; stages.len()];
            for (slot, k) in sorted {
                while done < k {
                    sum += self.trees[done].predict(row);
                    done += 1;
                }
                vals[slot] = self.base_prediction + self.learning_rate * sum;
            }
            vals
        });
        (0..stages.len()).map(|s| rows.iter().map(|r| r[s]).collect()).collect()
    }

    /// Total split gain per feature across all trees.
    pub fn gain_totals(&self, n_features: usize) -> Vec<f64> {
        let mut totals = vec![0.0; n_features];
        for t in &self.trees {
            t.root.accumulate_gains(&mut totals);
        }
        totals
    }
}

/// Starts from the target mean and fits each tree to the current residuals,
/// adding `learning_rate * tree`.
pub fn boost(
    features: &Matrix,
    targets: &[f64],
    params: TreeParams,
    learning_rate: f64,
) -> Result<GbtEnsemble, GbtError> {
    if targets.is_empty() {
        return Err(GbtError::EmptyData);
    }
    if features.rows() != targets.len() {
        return Err(GbtError::DimensionMismatch {
            rows: features.rows(),
            targets: targets.len(),
        });
    }
    if !(learning_rate > 0.0 && learning_rate <= 1.0) {
        return Err(GbtError::InvalidParameter(format!(
            "learning rate must lie in (0, 1], got {learning_rate}"
        )));
    }
    if !features.all_finite() || targets.iter().any(|v| !v.is_finite()) {
        return Err(GbtError::NonFinite);
    }
    let columns = columns_of(features);
    let base = targets.iter().sum::<f64>() / targets.len() as f64;
    let mut pred = vec![base; targets.len()];
    let mut trees = Vec::with_capacity(params.n_trees);
    for _ in 0..params.n_trees {
        let residuals: Vec<f64> = targets.iter().zip(&pred).map(|(y, p)| y - p).collect();
        let tree = grow_from_columns(&residuals, &columns, params.max_depth, params.min_leaf);
        for (i, p) in pred.iter_mut().enumerate() {
            *p += learning_rate * tree.predict(features.row(i));
        }
        trees.push(tree);
    }
    Ok(GbtEnsemble {
        base_prediction: base,
        learning_rate,
        params,
        trees,
    })
}
