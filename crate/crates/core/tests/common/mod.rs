#![allow(dead_code)]

use mortmap::autoenc::{forward, l1_loss, NetParams};
use mortmap::gbt::split::MIN_RELATIVE_GAIN;
use mortmap::gbt::SplitSpec;
use mortmap::graph::RegionGraph;
use mortmap::linalg::Matrix;
use mortmap::rates::RateField;
use mortmap::rng::SplitMix64;
use mortmap::synth::{lattice_graph, lattice_ids, LatticeSpec};

/// Every (feature, midpoint) pair scored directly from the definition.
pub fn split_oracle(y: &[f64], cols: &[Vec<f64>], min_leaf: usize) -> Option<SplitSpec> {
    let n = y.len();
    let s = n as f64;
    let loss = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m).abs()).sum::<f64>() / v.len() as f64
    };
    let parent = loss(y);
    let mut best: Option<SplitSpec> = None;
    for (j, col) in cols.iter().enumerate() {
        let mut vals = col.clone();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let mut h = w[0] + (w[1] - w[0]) / 2.0;
            if h >= w[1] {
                h = w[0];
            }
            let left: Vec<f64> = (0..n).filter(|&i| col[i] <= h).map(|i| y[i]).collect();
            let right: Vec<f64> = (0..n).filter(|&i| col[i] > h).map(|i| y[i]).collect();
            if left.len() < min_leaf || right.len() < min_leaf {
                continue;
            }
            let gain = parent - (left.len() as f64 / s) * loss(&left) - (right.len() as f64 / s) * loss(&right);
            let replace = match best {
                None => true,
                Some(b) => gain > b.gain,
            };
            if replace {
                best = Some(SplitSpec { feature: j, threshold: h, gain });
            }
        }
    }
    best.filter(|b| b.gain > MIN_RELATIVE_GAIN * parent.max(1.0))
}

/// Random split instance with coarse value grids, forcing ties in both
/// features and targets.
pub fn split_instance(seed: u64) -> (Vec<f64>, Vec<Vec<f64>>, usize) {
    let mut rng = SplitMix64::new(seed);
    let n = 2 + rng.next_below(199) as usize;
    let levels = 2 + rng.next_below(40);
    let cols: Vec<Vec<f64>> = (0..13)
        .map(|_| (0..n).map(|_| rng.next_below(levels) as f64 * 2.5).collect())
        .collect();
    let y: Vec<f64> = (0..n)
        .map(|i| cols[3][i] * 0.7 + (rng.next_f64() * 20.0).round() + if i % 5 == 0 { 40.0 } else { 0.0 })
        .collect();
    let min_leaf = 1 + rng.next_below(5) as usize;
    (y, cols, min_leaf)
}

/// A small lattice with its queen neighbour lists computed from cell
/// coordinates, indexed like the graph.
pub struct Grid {
    pub graph: RegionGraph,
    pub neighbors: Vec<Vec<usize>>,
}

pub fn grid(rows: usize, cols: usize) -> Grid {
    let spec = LatticeSpec::rectangle(rows, cols, 3);
    let graph = lattice_graph(&spec).unwrap();
    let cells = lattice_ids(&spec);
    let mut neighbors = vec![Vec::new(); graph.len()];
    for &((r, c), id) in &cells {
        let i = graph.index_of(&id).unwrap();
        for &((r2, c2), id2) in &cells {
            let (dr, dc) = (r.abs_diff(r2), c.abs_diff(c2));
            if dr <= 1 && dc <= 1 && (dr, dc) != (0, 0) {
                neighbors[i].push(graph.index_of(&id2).unwrap());
            }
        }
    }
    Grid { graph, neighbors }
}

/// Random grid of at most 36 regions with 10-60% of values missing and at
/// least one available.
pub fn random_grid_field(seed: u64) -> (Grid, Vec<Option<f64>>) {
    let mut rng = SplitMix64::new(seed);
    let (rows, cols) = loop {
        let r = 1 + rng.next_below(6) as usize;
        let c = 1 + rng.next_below(6) as usize;
        if r * c >= 2 {
            break (r, c);
        }
    };
    let g = grid(rows, cols);
    let share = 0.1 + 0.5 * rng.next_f64();
    let mut values: Vec<Option<f64>> = (0..g.graph.len())
        .map(|_| {
            let v = (rng.next_f64() * 50.0 * 100.0).round() / 100.0;
            if rng.next_f64() < share { None } else { Some(v) }
        })
        .collect();
    if values.iter().all(Option::is_none) {
        values[0] = Some(12.5);
    }
    if values.iter().all(Option::is_some) {
        values[g.graph.len() - 1] = None;
    }
    (g, values)
}

/// Direct transcription of the pass schedule: passes k = 1, 2, ... impute
/// regions with exactly k missing neighbours (and at least one available)
/// from the pass-start snapshot, repeated until no missing region has a
/// missing neighbour; the rest then take their full neighbourhood mean.
pub fn neighbor_mean_oracle(neighbors: &[Vec<usize>], values: &[Option<f64>]) -> Option<Vec<f64>> {
    let mut cur = values.to_vec();
    let missing_nb = |cur: &[Option<f64>], i: usize| neighbors[i].iter().filter(|&&j| cur[j].is_none()).count();
    let mean_avail = |cur: &[Option<f64>], i: usize| {
        let avail: Vec<f64> = neighbors[i].iter().filter_map(|&j| cur[j]).collect();
        avail.iter().sum::<f64>() / avail.len() as f64
    };
    loop {
        let blocked = (0..cur.len()).any(|i| cur[i].is_none() && missing_nb(&cur, i) > 0);
        if !blocked {
            break;
        }
        let mut any = false;
        for k in 1..=8 {
            let snap = cur.clone();
            for i in 0..snap.len() {
                if snap[i].is_none() && missing_nb(&snap, i) == k && k < neighbors[i].len() {
                    cur[i] = Some(mean_avail(&snap, i));
                    any = true;
                }
            }
        }
        if !any {
            return None;
        }
    }
    let snap = cur.clone();
    for i in 0..snap.len() {
        if snap[i].is_none() {
            cur[i] = Some(mean_avail(&snap, i));
        }
    }
    Some(cur.into_iter().map(Option::unwrap).collect())
}

pub fn field_of(graph: &RegionGraph, year: i32, values: &[Option<f64>]) -> RateField {
    RateField::from_aligned(year, graph, values)
}

pub fn jittered_inputs(n: usize, features: usize, rng: &mut SplitMix64) -> Matrix {
    Matrix::from_vec(n, features, (0..n * features).map(|_| 0.01 + 0.98 * rng.next_f64()).collect())
}

/// Sign pattern of every kink the L1 loss of a ReLU network passes through.
pub fn kinks(p: &NetParams, x: &Matrix, y: &[f64]) -> Vec<bool> {
    let (out, cache) = forward(p, x).unwrap();
    let [z1, z3] = cache.hidden_pre_activations();
    z1.iter()
        .chain(z3)
        .map(|&z| z > 0.0)
        .chain(out.iter().zip(y).map(|(o, t)| o > t))
        .collect()
}

pub fn ae_loss(p: &NetParams, x: &Matrix, y: &[f64]) -> f64 {
    l1_loss(&forward(p, x).unwrap().0, y).unwrap()
}
