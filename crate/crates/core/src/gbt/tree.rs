//! Regression trees grown with the mean-absolute-deviation gain.

use serde::{Deserialize, Serialize};

use super::split::{find_best_split, mad_loss};
use super::GbtError;
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        gain: f64,
        samples: usize,
        left: Box<Node>,
        right: Box<Node>,
    },
    Leaf {
        value: f64,
        samples: usize,
    },
}

impl Node {
    pub fn samples(&self) -> usize {
        match self {
            Node::Split { samples, .. } | Node::Leaf { samples, .. } => *samples,
        }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                Node::Leaf { value, .. } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => node = if row[*feature] <= *threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Split { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    /// Adds each split's gain to `totals[feature]`.
    pub fn accumulate_gains(&self, totals: &mut [f64]) {
        if let Node::Split {
            feature,
            gain,
            left,
            right,
            ..
        } = self
        {
            totals[*feature] += gain;
            left.accumulate_gains(totals);
            right.accumulate_gains(totals);
        }
    }

    /// Visits every split node as `(feature, threshold, gain, samples)`.
    pub fn for_each_split(&self, f: &mut impl FnMut(usize, f64, f64, usize)) {
        if let Node::Split {
            feature,
            threshold,
            gain,
            samples,
            left,
            right,
        } = self
        {
            f(*feature, *threshold, *gain, *samples);
            left.for_each_split(f);
            right.for_each_split(f);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RegressionTree {
    pub root: Node,
}

impl RegressionTree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.root.predict(row)
    }
}

/// Column-major copy of a row-major feature matrix.
pub fn columns_of(features: &Matrix) -> Vec<Vec<f64>> {
    (0..features.cols()).map(|j| features.column(j)).collect()
}

pub fn grow_tree(
    targets: &[f64],
    features: &Matrix,
    max_depth: usize,
    min_leaf: usize,
) -> Result<RegressionTree, GbtError> {
    if targets.is_empty() {
        return Err(GbtError::EmptyData);
    }
    if features.rows() != targets.len() {
        return Err(GbtError::DimensionMismatch {
            rows: features.rows(),
            targets: targets.len(),
        });
    }
    Ok(grow_from_columns(targets, &columns_of(features), max_depth, min_leaf))
}

pub(crate) fn grow_from_columns(
    targets: &[f64],
    columns: &[Vec<f64>],
    max_depth: usize,
    min_leaf: usize,
) -> RegressionTree {
    let idx: Vec<usize> = (0..targets.len()).collect();
    RegressionTree {
        root: grow_node(targets, columns, &idx, max_depth, min_leaf),
    }
}

fn grow_node(targets: &[f64], columns: &[Vec<f64>], idx: &[usize], depth_left: usize, min_leaf: usize) -> Node {
    let ys: Vec<f64> = idx.iter().map(|&i| targets[i]).collect();
    let (mean, _) = mad_loss(&ys);
    let leaf = Node::Leaf {
        value: mean,
        samples: idx.len(),
    };
    if depth_left == 0 {
        return leaf;
    }
    let cols: Vec<Vec<f64>> = columns.iter().map(|c| idx.iter().map(|&i| c[i]).collect()).collect();
    let Some(split) = find_best_split(&ys, &cols, min_leaf) else {
        return leaf;
    };
    let (l, r): (Vec<usize>, Vec<usize>) = idx
        .iter()
        .partition(|&&i| columns[split.feature][i] <= split.threshold);
    Node::Split {
        feature: split.feature,
        threshold: split.threshold,
        gain: split.gain,
        samples: idx.len(),
        left: Box::new(grow_node(targets, columns, &l, depth_left - 1, min_leaf)),
        right: Box::new(grow_node(targets, columns, &r, depth_left - 1, min_leaf)),
    }
}
