//! Best-split search with the mean-absolute-deviation loss.
//!
//! For a node `Q` with `s` samples, `L(Q) = (1/s) * sum |y - mean(Q)|`, and a
//! split into `Q_l`, `Q_r` has gain `L(Q) - (s_l/s) L(Q_l) - (s_r/s) L(Q_r)`.
//! Candidate thresholds are midpoints between consecutive distinct feature
//! values; the left child takes `x <= h`.
//!
//! Each feature is scanned in sorted order with Fenwick trees keyed by target
//! rank, which gives every prefix/suffix absolute deviation in `O(log n)`.
//! Candidates whose fast gain is within rounding distance of the best are then
//! recomputed with plain sums in sample order, and the winner is chosen from
//! those exact values by (gain, lower feature, lower threshold).

use serde::{Deserialize, Serialize};

use crate::par;

/// Relative margin used to shortlist candidates for exact re-evaluation.
const SHORTLIST_TOLERANCE: f64 = 1e-9;
/// Splits must beat this fraction of `max(1, L(Q))` to count as a gain.
pub const MIN_RELATIVE_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Mean and mean absolute deviation of `ys`, summed in iteration order.
pub fn mad_loss(ys: &[f64]) -> (f64, f64) {
    let s = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / s;
    let loss = ys.iter().map(|y| (y - mean).abs()).sum::<f64>() / s;
    (mean, loss)
}

/// Midpoint threshold between two consecutive distinct values. If rounding
/// puts the midpoint on the upper value, the lower value is used so that the
/// partition stays `x <= lo` versus `x >= hi`.
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    let h = lo + (hi - lo) / 2.0;
    if h >= hi {
        lo
    } else {
        h
    }
}

/// Gain of splitting at `x <= threshold`, with all sums taken in sample order.
pub fn exact_gain(targets: &[f64], column: &[f64], threshold: f64, parent_loss: f64) -> f64 {
    let mut left = Vec::new();
    let mut right = Vec::new();
    for (&y, &x) in targets.iter().zip(column) {
        if x <= threshold {
            left.push(y);
        } else {
            right.push(y);
        }
    }
    let s = targets.len() as f64;
    let (_, ll) = mad_loss(&left);
    let (_, lr) = mad_loss(&right);
    parent_loss - (left.len() as f64 / s) * ll - (right.len() as f64 / s) * lr
}

struct Fenwick {
    count: Vec<u32>,
    sum: Vec<f64>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Fenwick {
            count: vec![0; n + 1],
            sum: vec![0.0; n + 1],
        }
    }

    fn add(&mut self, pos: usize, value: f64) {
        let mut i = pos + 1;
        while i < self.count.len() {
            self.count[i] += 1;
            self.sum[i] += value;
            i += i & i.wrapping_neg();
        }
    }

    /// Count and sum over positions `< pos`.
    fn prefix(&self, pos: usize) -> (f64, f64) {
        let (mut c, mut s) = (0u32, 0.0);
        let mut i = pos;
        while i > 0 {
            c += self.count[i];
            s += self.sum[i];
            i -= i & i.wrapping_neg();
        }
        (c as f64, s)
    }
}

struct TargetIndex {
    sorted: Vec<f64>,
    rank: Vec<usize>,
    /// `all_sum[p]` is the sum of the `p` smallest targets.
    all_sum: Vec<f64>,
    total: f64,
}

impl TargetIndex {
    fn new(targets: &[f64]) -> Self {
        let n = targets.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| targets[a].total_cmp(&targets[b]).then(a.cmp(&b)));
        let mut rank = vec![0; n];
        for (r, &i) in order.iter().enumerate() {
            rank[i] = r;
        }
        let sorted: Vec<f64> = order.iter().map(|&i| targets[i]).collect();
        let mut all_sum = Vec::with_capacity(n + 1);
        all_sum.push(0.0);
        let mut acc = 0.0;
        for &v in &sorted {
            acc += v;
            all_sum.push(acc);
        }
        TargetIndex {
            sorted,
            rank,
            all_sum,
            total: acc,
        }
    }
}

/// Fast gains of every admissible threshold on one feature.
fn scan_feature(
    targets: &[f64],
    column: &[f64],
    index: &TargetIndex,
    min_leaf: usize,
    parent_loss: f64,
) -> Vec<(f64, f64)> {
    let n = targets.len();
    let s = n as f64;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| column[a].total_cmp(&column[b]).then(a.cmp(&b)));
    let mut left = Fenwick::new(n);
    let mut sum_left = 0.0;
    let mut out = Vec::new();
    for t in 0..n - 1 {
        let i = order[t];
        left.add(index.rank[i], targets[i]);
        sum_left += targets[i];
        let (lo, hi) = (column[i], column[order[t + 1]]);
        let nl = t + 1;
        let nr = n - nl;
        if lo == hi || nl < min_leaf || nr < min_leaf {
            continue;
        }
        let cl = nl as f64;
        let cr = nr as f64;
        let ml = sum_left / cl;
        let pl = index.sorted.partition_point(|&v| v < ml);
        let (bc, bs) = left.prefix(pl);
        let abs_l = ml * bc - bs + (sum_left - bs) - ml * (cl - bc);

        let sum_right = index.total - sum_left;
        let mr = sum_right / cr;
        let pr = index.sorted.partition_point(|&v| v < mr);
        let (lbc, lbs) = left.prefix(pr);
        let rbc = pr as f64 - lbc;
        let rbs = index.all_sum[pr] - lbs;
        let abs_r = mr * rbc - rbs + (sum_right - rbs) - mr * (cr - rbc);

        out.push((parent_loss - (abs_l + abs_r) / s, midpoint(lo, hi)));
    }
    out
}

/// The gain-maximising split of a node, or `None` when the node is smaller
/// than `2 * min_leaf` or no admissible split has a positive gain.
/// `columns[j][i]` is feature `j` of sample `i`.
pub fn find_best_split(targets: &[f64], columns: &[Vec<f64>], min_leaf: usize) -> Option<SplitSpec> {
    let n = targets.len();
    let min_leaf = min_leaf.max(1);
    if n < 2 * min_leaf || n < 2 {
        return None;
    }
    let (_, parent_loss) = mad_loss(targets);
    if parent_loss == 0.0 {
        return None;
    }
    let index = TargetIndex::new(targets);
    let features: Vec<usize> = (0..columns.len()).collect();
    let scans = par::map(&features, |&j| scan_feature(targets, &columns[j], &index, min_leaf, parent_loss));

    let best_fast = scans
        .iter()
        .flat_map(|c| c.iter().map(|p| p.0))
        .fold(f64::NEG_INFINITY, f64::max);
    if best_fast == f64::NEG_INFINITY {
        return None;
    }
    let scale = parent_loss.max(index.sorted[0].abs()).max(index.sorted[n - 1].abs());
    let cutoff = best_fast - SHORTLIST_TOLERANCE * scale;

    let mut best: Option<SplitSpec> = None;
    for (j, cands) in scans.iter().enumerate() {
        for &(fast, h) in cands {
            if fast < cutoff {
                continue;
            }
            let gain = exact_gain(targets, &columns[j], h, parent_loss);
            let better = match best {
                None => true,
                Some(b) => gain > b.gain || (gain == b.gain && (j, h) < (b.feature, b.threshold)),
            };
            if better {
                best = Some(SplitSpec { feature: j, threshold: h, gain });
            }
        }
    }
    best.filter(|b| b.gain > MIN_RELATIVE_GAIN * parent_loss.max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_point_example() {
        let y = [0.0, 0.0, 10.0, 10.0];
        let x = vec![vec![1.0, 2.0, 3.0, 4.0]];
        let s = find_best_split(&y, &x, 1).unwrap();
        assert_eq!(s, SplitSpec { feature: 0, threshold: 2.5, gain: 5.0 });
    }

    #[test]
    fn constant_targets_do_not_split() {
        let y = [3.0; 6];
        let x = vec![vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]];
        assert_eq!(find_best_split(&y, &x, 1), None);
    }

    #[test]
    fn constant_feature_does_not_split() {
        let y = [1.0, 2.0, 3.0];
        assert_eq!(find_best_split(&y, &[vec![5.0; 3]], 1), None);
    }

    #[test]
    fn min_leaf_respected() {
        let y = [0.0, 10.0, 10.0, 10.0];
        let x = vec![vec![1.0, 2.0, 3.0, 4.0]];
        assert_eq!(find_best_split(&y, &x, 1).unwrap().threshold, 1.5);
        assert_eq!(find_best_split(&y, &x, 2).unwrap().threshold, 2.5);
        assert_eq!(find_best_split(&y, &x, 3), None);
    }

    #[test]
    fn ties_prefer_lower_feature() {
        let y = [0.0, 0.0, 10.0, 10.0];
        let col = vec![1.0, 2.0, 3.0, 4.0];
        let s = find_best_split(&y, &[col.clone(), col], 1).unwrap();
        assert_eq!(s.feature, 0);
    }

    #[test]
    fn midpoint_never_reaches_upper() {
        let lo = 1.0f64;
        let hi = f64::from_bits(lo.to_bits() + 1);
        assert_eq!(midpoint(lo, hi), lo);
        assert_eq!(midpoint(2.0, 3.0), 2.5);
    }
}
