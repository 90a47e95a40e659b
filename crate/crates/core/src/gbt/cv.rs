//! Seeded k-fold partitions, grid search and out-of-fold prediction.

use serde::{Deserialize, Serialize};

use super::boost::{boost, TreeParams, DEFAULT_LEARNING_RATE};
use super::GbtError;
use crate::linalg::Matrix;
use crate::par;
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n_trees: Vec<usize>,
    pub max_depth: Vec<usize>,
    pub min_leaf: Vec<usize>,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            n_trees: vec![50, 100, 200],
            max_depth: vec![3, 4, 6],
            min_leaf: vec![5, 20],
        }
    }
}

impl Grid {
    pub fn single(params: TreeParams) -> Self {
        Grid {
            n_trees: vec![params.n_trees],
            max_depth: vec![params.max_depth],
            min_leaf: vec![params.min_leaf],
        }
    }

    /// All configurations, tree count varying slowest.
    pub fn configs(&self) -> Vec<TreeParams> {
        let mut out = Vec::new();
        for &n_trees in &self.n_trees {
            for &max_depth in &self.max_depth {
                for &min_leaf in &self.min_leaf {
                    out.push(TreeParams { n_trees, max_depth, min_leaf });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvConfig {
    pub folds: usize,
    pub grid: Grid,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            folds: 5,
            grid: Grid::default(),
            learning_rate: DEFAULT_LEARNING_RATE,
            seed: 0,
        }
    }
}

/// Fold label per sample: a seeded shuffle of `0..n`, then position mod `k`.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    SplitMix64::new(seed).shuffle(&mut perm);
    let mut folds = vec![0; n];
    for (pos, &i) in perm.iter().enumerate() {
        folds[i] = pos % k;
    }
    folds
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub oof: Vec<f64>,
    pub folds: Vec<usize>,
    pub chosen: TreeParams,
    /// Mean validation MAE per grid configuration, in grid order.
    pub grid_scores: Vec<(TreeParams, f64)>,
}

fn subset(features: &Matrix, idx: &[usize]) -> Matrix {
    let mut data = Vec::with_capacity(idx.len() * features.cols());
    for &i in idx {
        data.extend_from_slice(features.row(i));
    }
    Matrix::from_vec(idx.len(), features.cols(), data)
}

/// Grid search by mean fold MAE, then out-of-fold predictions with the chosen
/// configuration. Ties go to the configuration listed first.
///
/// Each (depth, min_leaf, fold) cell trains the largest tree count once and
/// reads smaller counts off its prefixes; boosting is deterministic, so these
/// are the same models a separate run per count would produce.
pub fn cv_predict(features: &Matrix, targets: &[f64], config: &CvConfig) -> Result<CvResult, GbtError> {
    let n = targets.len();
    if features.rows() != n {
        return Err(GbtError::DimensionMismatch { rows: features.rows(), targets: n });
    }
    if config.folds < 2 || n < config.folds {
        return Err(GbtError::InsufficientData { n, folds: config.folds });
    }
    let configs = config.grid.configs();
    if configs.is_empty() {
        return Err(GbtError::InvalidParameter("empty hyperparameter grid".into()));
    }
    let folds = fold_assignment(n, config.folds, config.seed);
    let mut stages: Vec<usize> = config.grid.n_trees.clone();
    stages.sort_unstable();
    stages.dedup();
    let max_trees = *stages.last().expect("nonempty grid");

    let mut shapes: Vec<(usize, usize)> = Vec::new();
    for &d in &config.grid.max_depth {
        for &m in &config.grid.min_leaf {
            if !shapes.contains(&(d, m)) {
                shapes.push((d, m));
            }
        }
    }
    let cells: Vec<(usize, usize)> = (0..shapes.len())
        .flat_map(|s| (0..config.folds).map(move |f| (s, f)))
        .collect();
    // predictions[cell][stage][validation position]
    let predictions = par::map(&cells, |&(s, f)| -> Result<Vec<Vec<f64>>, GbtError> {
        let (max_depth, min_leaf) = shapes[s];
        let train: Vec<usize> = (0..n).filter(|&i| folds[i] != f).collect();
        let valid: Vec<usize> = (0..n).filter(|&i| folds[i] == f).collect();
        let ys: Vec<f64> = train.iter().map(|&i| targets[i]).collect();
        let model = boost(
            &subset(features, &train),
            &ys,
            TreeParams { n_trees: max_trees, max_depth, min_leaf },
            config.learning_rate,
        )?;
        Ok(model.predict_staged(&subset(features, &valid), &stages))
    });
    let predictions: Vec<Vec<Vec<f64>>> = predictions.into_iter().collect::<Result<_, _>>()?;

    let valid_idx: Vec<Vec<usize>> = (0..config.folds)
        .map(|f| (0..n).filter(|&i| folds[i] == f).collect())
        .collect();
    let lookup = |p: &TreeParams, f: usize| -> &Vec<f64> {
        let s = shapes.iter().position(|&x| x == (p.max_depth, p.min_leaf)).expect("shape listed");
        let st = stages.binary_search(&p.n_trees).expect("stage listed");
        &predictions[s * config.folds + f][st]
    };

    let mut grid_scores = Vec::with_capacity(configs.len());
    for p in &configs {
        let mut total = 0.0;
        for (f, idx) in valid_idx.iter().enumerate() {
            let preds = lookup(p, f);
            let mae = idx.iter().zip(preds).map(|(&i, q)| (q - targets[i]).abs()).sum::<f64>() / idx.len() as f64;
            total += mae;
        }
        grid_scores.push((*p, total / config.folds as f64));
    }
    let mut chosen = grid_scores[0];
    for &g in &grid_scores[1..] {
        if g.1 < chosen.1 {
            chosen = g;
        }
    }
    let mut oof = vec![f64::NAN; n];
    for (f, idx) in valid_idx.iter().enumerate() {
        for (&i, &q) in idx.iter().zip(lookup(&chosen.0, f)) {
            oof[i] = q;
        }
    }
    Ok(CvResult {
        oof,
        folds,
        chosen: chosen.0,
        grid_scores,
    })
}
