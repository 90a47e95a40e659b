//! Heavy-tailed distribution fits and hot/cold/zero anomaly labelling.
//!
//! Nonzero rates are fitted with four positive-support families; the fitted
//! quantiles at `tail` and `1 - tail` split regions into hot (strictly above
//! the upper quantile), cold (nonzero and strictly below the lower one) and a
//! separate zero set.

pub mod dist;
pub mod special;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use thiserror::Error;

pub use dist::{
    fit_mle, ks_statistic, select_best, Distribution, Family, FamilyDiagnostics, FittedDistribution, Selection,
};

use crate::rates::RateField;
use crate::ranking::FeatureScores;
use crate::region::RegionId;
use crate::temporal::{FeaturePanel, FEATURE_COUNT};

pub const DEFAULT_TAILS: [f64; 3] = [0.01, 0.02, 0.03];

#[derive(Debug, Error)]
pub enum AnomalyError {
    #[error("need at least {needed} samples to fit, found {found}")]
    InsufficientSamples { needed: usize, found: usize },
    #[error("samples must be positive and finite, found {0}")]
    NonPositiveSample(f64),
    #[error("all samples are identical")]
    DegenerateSample,
    #[error("{0} fit did not converge")]
    NoConvergence(Family),
    #[error("no family could be fitted ({0})")]
    AllFitsFailed(String),
    #[error("tail must lie in (0, 0.5), got {0}")]
    InvalidTail(f64),
    #[error("field {0} has missing rates")]
    IncompleteInput(i32),
    #[error("no year contains {0} regions")]
    EmptyAnomalySet(SetKind),
    #[error("feature panel lacks year {0}")]
    MissingYear(i32),
    #[error("feature panel has no complete covariates for {region} in {year}")]
    MissingFeatures { region: RegionId, year: i32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Hot,
    Cold,
    Zero,
    None,
}

impl Label {
    pub fn name(&self) -> &'static str {
        match self {
            Label::Hot => "hot",
            Label::Cold => "cold",
            Label::Zero => "zero",
            Label::None => "none",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyLabeling {
    pub year: i32,
    pub hot: BTreeSet<RegionId>,
    pub cold: BTreeSet<RegionId>,
    pub zero: BTreeSet<RegionId>,
    pub tail: f64,
    pub q_low: f64,
    pub q_high: f64,
}

impl AnomalyLabeling {
    pub fn label_of(&self, region: &RegionId) -> Label {
        if self.hot.contains(region) {
            Label::Hot
        } else if self.cold.contains(region) {
            Label::Cold
        } else if self.zero.contains(region) {
            Label::Zero
        } else {
            Label::None
        }
    }

    pub fn set(&self, kind: SetKind) -> &BTreeSet<RegionId> {
        match kind {
            SetKind::Hot => &self.hot,
            SetKind::Cold => &self.cold,
            SetKind::Zero => &self.zero,
        }
    }
}

/// Nonzero rates of a field, the sample that the families are fitted to.
pub fn nonzero_rates(field: &RateField) -> Vec<f64> {
    field.available().into_iter().filter(|&v| v > 0.0).collect()
}

pub fn label_anomalies(field: &RateField, dist: &Distribution, tail: f64) -> Result<AnomalyLabeling, AnomalyError> {
    if !(tail > 0.0 && tail < 0.5) {
        return Err(AnomalyError::InvalidTail(tail));
    }
    if !field.is_complete() {
        return Err(AnomalyError::IncompleteInput(field.year));
    }
    let q_low = dist.quantile(tail);
    let q_high = dist.quantile(1.0 - tail);
    let mut out = AnomalyLabeling {
        year: field.year,
        hot: BTreeSet::new(),
        cold: BTreeSet::new(),
        zero: BTreeSet::new(),
        tail,
        q_low,
        q_high,
    };
    for (r, v) in field.iter() {
        let y = v.expect("complete field");
        if y == 0.0 {
            out.zero.insert(*r);
        } else if y > q_high {
            out.hot.insert(*r);
        } else if y < q_low {
            out.cold.insert(*r);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailSummary {
    pub labeling: AnomalyLabeling,
    pub hot_count: usize,
    pub cold_count: usize,
    /// Set when the tail produces no cold anomalies at all.
    pub cold_empty: bool,
}

pub fn tail_sweep(field: &RateField, dist: &Distribution, tails: &[f64]) -> Result<Vec<TailSummary>, AnomalyError> {
    tails
        .iter()
        .map(|&t| {
            let labeling = label_anomalies(field, dist, t)?;
            let cold_empty = labeling.cold.is_empty();
            if cold_empty {
                log::info!("year {}: tail {t} yields no cold anomalies", field.year);
            }
            Ok(TailSummary {
                hot_count: labeling.hot.len(),
                cold_count: labeling.cold.len(),
                cold_empty,
                labeling,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SetKind {
    Hot,
    Cold,
    Zero,
}

impl SetKind {
    pub const ALL: [SetKind; 3] = [SetKind::Hot, SetKind::Cold, SetKind::Zero];

    pub fn name(&self) -> &'static str {
        match self {
            SetKind::Hot => "hot",
            SetKind::Cold => "cold",
            SetKind::Zero => "zero",
        }
    }

    /// Hot rankings list the largest means first; cold and zero the smallest.
    pub fn descending(&self) -> bool {
        matches!(self, SetKind::Hot)
    }
}

impl fmt::Display for SetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SetKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| format!("unknown anomaly set {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingReport {
    pub kind: SetKind,
    pub scores: FeatureScores,
    pub skipped_years: Vec<i32>,
}

/// Mean covariate percentile over each year's anomaly set, averaged across
/// years. Years whose set is empty are skipped.
pub fn rank_features(
    labelings: &[AnomalyLabeling],
    panel: &FeaturePanel,
    kind: SetKind,
) -> Result<RankingReport, AnomalyError> {
    let mut yearly = BTreeMap::new();
    let mut skipped = Vec::new();
    for lab in labelings {
        let rows = panel.rows(lab.year).ok_or(AnomalyError::MissingYear(lab.year))?;
        let set = lab.set(kind);
        if set.is_empty() {
            log::warn!("year {}: no {kind} regions, skipped in ranking", lab.year);
            skipped.push(lab.year);
            continue;
        }
        let mut sums = [0.0; FEATURE_COUNT];
        for r in set {
            let i = panel
                .regions()
                .binary_search(r)
                .map_err(|_| AnomalyError::MissingFeatures { region: *r, year: lab.year })?;
            for (s, v) in sums.iter_mut().zip(&rows[i]) {
                *s += v.ok_or(AnomalyError::MissingFeatures { region: *r, year: lab.year })?;
            }
        }
        let k = set.len() as f64;
        yearly.insert(lab.year, sums.map(|s| s / k));
    }
    if yearly.is_empty() {
        return Err(AnomalyError::EmptyAnomalySet(kind));
    }
    Ok(RankingReport {
        kind,
        scores: FeatureScores::from_yearly(yearly, kind.descending()),
        skipped_years: skipped,
    })
}

/// `fips,year,label` for every region of every labelled year.
pub fn write_labels_csv<W: Write>(fields: &[&RateField], labelings: &[AnomalyLabeling], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["fips", "year", "label"])?;
    for (field, lab) in fields.iter().zip(labelings) {
        let year = lab.year.to_string();
        for r in field.regions() {
            w.write_record([r.as_str(), year.as_str(), lab.label_of(r).name()])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rid(i: u32) -> RegionId {
        RegionId::from_parts(6, i).unwrap()
    }

    fn field(vals: &[f64]) -> RateField {
        RateField::from_pairs(2016, vals.iter().enumerate().map(|(i, &v)| (rid(i as u32 + 1), Some(v)))).unwrap()
    }

    #[test]
    fn strict_thresholds_and_zero_set() {
        let d = Distribution::Lognormal { mu: 2.0, sigma: 0.5 };
        let q_low = d.quantile(0.02);
        let q_high = d.quantile(0.98);
        let f = field(&[0.0, q_low, q_low * 0.9, q_high, q_high * 1.1, 7.0]);
        let lab = label_anomalies(&f, &d, 0.02).unwrap();
        assert_eq!(lab.zero, BTreeSet::from([rid(1)]));
        assert_eq!(lab.cold, BTreeSet::from([rid(3)]));
        assert_eq!(lab.hot, BTreeSet::from([rid(5)]));
        assert_eq!(lab.label_of(&rid(2)), Label::None);
        assert_eq!(lab.label_of(&rid(4)), Label::None);
        assert!(matches!(label_anomalies(&f, &d, 0.5), Err(AnomalyError::InvalidTail(_))));
    }

    #[test]
    fn ranking_means() {
        let mut panel = FeaturePanel::new([rid(1), rid(2), rid(3)]);
        let row = |v: f64| [Some(v); FEATURE_COUNT];
        panel.insert_year(2016, vec![row(70.0), row(80.0), row(10.0)]).unwrap();
        panel.insert_year(2017, vec![row(10.0), row(20.0), row(30.0)]).unwrap();
        let lab = |year, hot: &[u32]| AnomalyLabeling {
            year,
            hot: hot.iter().map(|&i| rid(i)).collect(),
            cold: BTreeSet::new(),
            zero: BTreeSet::new(),
            tail: 0.02,
            q_low: 0.0,
            q_high: 0.0,
        };
        let rep = rank_features(&[lab(2016, &[1, 2]), lab(2017, &[3])], &panel, SetKind::Hot).unwrap();
        assert_eq!(rep.scores.yearly[&2016][0], 75.0);
        assert_eq!(rep.scores.average[4], (75.0 + 30.0) / 2.0);
        let only_empty = rank_features(&[lab(2016, &[])], &panel, SetKind::Hot);
        assert!(matches!(only_empty, Err(AnomalyError::EmptyAnomalySet(SetKind::Hot))));
        let skipping = rank_features(&[lab(2016, &[]), lab(2017, &[3])], &panel, SetKind::Hot).unwrap();
        assert_eq!(skipping.skipped_years, vec![2016]);
    }
}
