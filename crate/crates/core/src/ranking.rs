//! Per-feature yearly scores, their cross-year average and the resulting
//! rank order. Shared by the anomaly, boosted-tree and attribution reports.

use std::collections::BTreeMap;
use std::io::Write;

use crate::io::fmt_sig6;
use crate::temporal::{FEATURE_COUNT, FEATURE_NAMES};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScores {
    pub yearly: BTreeMap<i32, [f64; FEATURE_COUNT]>,
    pub average: [f64; FEATURE_COUNT],
    /// Feature indices, best first.
    pub order: Vec<usize>,
    pub descending: bool,
}

impl FeatureScores {
    /// Averages the yearly scores and sorts features by the average. Ties
    /// keep canonical feature order.
    pub fn from_yearly(yearly: BTreeMap<i32, [f64; FEATURE_COUNT]>, descending: bool) -> Self {
        let mut average = [0.0; FEATURE_COUNT];
        if !yearly.is_empty() {
            for scores in yearly.values() {
                for (a, s) in average.iter_mut().zip(scores) {
                    *a += s;
                }
            }
            let k = yearly.len() as f64;
            for a in &mut average {
                *a /= k;
            }
        }
        let mut order: Vec<usize> = (0..FEATURE_COUNT).collect();
        order.sort_by(|&a, &b| {
            let c = average[a].total_cmp(&average[b]);
            if descending { c.reverse() } else { c }.then(a.cmp(&b))
        });
        FeatureScores {
            yearly,
            average,
            order,
            descending,
        }
    }

    /// 1-based rank of a feature.
    pub fn rank_of(&self, feature: usize) -> usize {
        self.order.iter().position(|&f| f == feature).expect("feature index in range") + 1
    }

    pub fn top(&self) -> usize {
        self.order[0]
    }

    /// `feature,year,<value_column>` in canonical feature order.
    pub fn write_yearly_csv<W: Write>(&self, value_column: &str, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["feature", "year", value_column])?;
        for (j, name) in FEATURE_NAMES.iter().enumerate() {
            for (year, scores) in &self.yearly {
                w.write_record([name.to_string(), year.to_string(), fmt_sig6(scores[j])])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// `feature,average,rank` in rank order.
    pub fn write_ranking_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["feature", "average", "rank"])?;
        for (r, &j) in self.order.iter().enumerate() {
            w.write_record([FEATURE_NAMES[j].to_string(), fmt_sig6(self.average[j]), (r + 1).to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}
