//! Covariate panels, linear fill of non-release years, and areal-weight
//! crosswalks between boundary frameworks.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use thiserror::Error;

use crate::graph::RegionGraph;
use crate::impute::{neighbor_mean_aligned, ImputeError};
use crate::io::{fmt_full, parse_optional};
use crate::linalg::Matrix;
use crate::par;
use crate::rates::{RateError, RateField};
use crate::region::RegionId;

pub const FEATURE_COUNT: usize = 13;

/// Canonical covariate order; also the column order of the covariate CSV.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "below_poverty",
    "unemployment",
    "no_high_school_diploma",
    "age_65_and_older",
    "age_17_and_younger",
    "single_parent_households",
    "limited_english",
    "minority_status",
    "multi_unit_structures",
    "mobile_homes",
    "crowding",
    "no_vehicle",
    "group_quarters",
];

pub type FeatureRow = [Option<f64>; FEATURE_COUNT];

#[derive(Debug, Error)]
pub enum TemporalError {
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("value {value} for {region}/{feature} in {year} is outside [0, 100]")]
    OutOfRange { region: RegionId, year: i32, feature: &'static str, value: f64 },
    #[error("year {0} lies outside the observed span and cannot be interpolated")]
    UnbracketedGap(i32),
    #[error("no observed years given")]
    NoObservedYears,
    #[error("year {0} is not in the panel")]
    MissingYear(i32),
    #[error("year {year} has missing covariates (first at {region})")]
    Incomplete { year: i32, region: RegionId },
    #[error("region sets differ: {0}")]
    RegionMismatch(String),
    #[error("crosswalk source {0} has no value in the input field")]
    MissingSource(RegionId),
    #[error("crosswalk target {0} has zero total weight")]
    ZeroWeightTarget(RegionId),
    #[error("crosswalk weight for {source_id}->{target} must be finite and nonnegative, got {weight}")]
    InvalidWeight { source_id: RegionId, target: RegionId, weight: f64 },
    #[error(transparent)]
    Impute(#[from] ImputeError),
    #[error(transparent)]
    Rates(#[from] RateError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Percentile-ranked covariates per year. Every year holds a row for each
/// region in `regions` (ascending), with explicit missing cells.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePanel {
    regions: Vec<RegionId>,
    years: BTreeMap<i32, Vec<FeatureRow>>,
}

impl FeaturePanel {
    pub fn new(regions: impl IntoIterator<Item = RegionId>) -> Self {
        let set: BTreeSet<RegionId> = regions.into_iter().collect();
        FeaturePanel {
            regions: set.into_iter().collect(),
            years: BTreeMap::new(),
        }
    }

    pub fn regions(&self) -> &[RegionId] {
        &self.regions
    }

    pub fn years(&self) -> Vec<i32> {
        self.years.keys().copied().collect()
    }

    pub fn has_year(&self, year: i32) -> bool {
        self.years.contains_key(&year)
    }

    pub fn rows(&self, year: i32) -> Option<&[FeatureRow]> {
        self.years.get(&year).map(Vec::as_slice)
    }

    /// Adds or replaces a year. Rows must align with [`FeaturePanel::regions`].
    pub fn insert_year(&mut self, year: i32, rows: Vec<FeatureRow>) -> Result<(), TemporalError> {
        if rows.len() != self.regions.len() {
            return Err(TemporalError::RegionMismatch(format!(
                "year {year} has {} rows for {} regions",
                rows.len(),
                self.regions.len()
            )));
        }
        for (r, row) in self.regions.iter().zip(&rows) {
            for (j, v) in row.iter().enumerate() {
                if let Some(v) = *v {
                    if !(0.0..=100.0).contains(&v) {
                        return Err(TemporalError::OutOfRange {
                            region: *r,
                            year,
                            feature: FEATURE_NAMES[j],
                            value: v,
                        });
                    }
                }
            }
        }
        self.years.insert(year, rows);
        Ok(())
    }

    pub fn get(&self, year: i32, region: &RegionId, feature: usize) -> Option<f64> {
        let i = self.regions.binary_search(region).ok()?;
        self.years.get(&year)?[i][feature]
    }

    pub fn missing_count(&self) -> usize {
        self.years
            .values()
            .flat_map(|rows| rows.iter().flat_map(|r| r.iter()))
            .filter(|v| v.is_none())
            .count()
    }

    pub fn is_complete(&self) -> bool {
        self.missing_count() == 0
    }

    /// The year's covariates as an `n x 13` matrix in region order, or an
    /// error if any cell is missing.
    pub fn matrix(&self, year: i32) -> Result<Matrix, TemporalError> {
        let rows = self.years.get(&year).ok_or(TemporalError::MissingYear(year))?;
        let mut data = Vec::with_capacity(rows.len() * FEATURE_COUNT);
        for (r, row) in self.regions.iter().zip(rows) {
            for v in row {
                data.push(v.ok_or(TemporalError::Incomplete { year, region: *r })?);
            }
        }
        Ok(Matrix::from_vec(rows.len(), FEATURE_COUNT, data))
    }

    /// One feature of one year as a rate-style field (for imputation and
    /// GeoJSON output).
    pub fn feature_field(&self, year: i32, feature: usize) -> Result<RateField, TemporalError> {
        let rows = self.years.get(&year).ok_or(TemporalError::MissingYear(year))?;
        Ok(RateField::from_pairs(
            year,
            self.regions.iter().zip(rows).map(|(r, row)| (*r, row[feature])),
        )?)
    }
}

/// Fills every year in `years` by per-region, per-feature linear interpolation
/// between the bracketing observed years where that region has a value.
///
/// A cell at an observed year that is itself missing (an unusable release for
/// one region) is filled from the neighbouring observed years. Cells with no
/// observation on one side stay missing so that spatial imputation can take
/// over. Results are clamped to `[0, 100]`.
pub fn linear_gap_fill(
    panel: &FeaturePanel,
    observed_years: &BTreeSet<i32>,
    years: std::ops::RangeInclusive<i32>,
) -> Result<FeaturePanel, TemporalError> {
    let (first, last) = match (observed_years.first(), observed_years.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(TemporalError::NoObservedYears),
    };
    for &y in observed_years {
        if !panel.has_year(y) {
            return Err(TemporalError::MissingYear(y));
        }
    }
    if *years.start() < first {
        return Err(TemporalError::UnbracketedGap(*years.start()));
    }
    if *years.end() > last {
        return Err(TemporalError::UnbracketedGap(*years.end()));
    }
    let obs: Vec<i32> = observed_years.iter().copied().collect();
    let n = panel.regions.len();
    let target: Vec<i32> = years.collect();

    // per (region, feature): fill the whole target range in one sweep
    let filled: Vec<Vec<FeatureRow>> = par::map_range(n, |i| {
        let mut out = vec![[None; FEATURE_COUNT]; target.len()];
        for j in 0..FEATURE_COUNT {
            let points: Vec<(i32, f64)> = obs
                .iter()
                .filter_map(|&y| panel.years[&y][i][j].map(|v| (y, v)))
                .collect();
            for (t, &y) in target.iter().enumerate() {
                out[t][j] = interpolate(&points, y);
            }
        }
        out
    });

    let mut result = FeaturePanel {
        regions: panel.regions.clone(),
        years: BTreeMap::new(),
    };
    for (t, &y) in target.iter().enumerate() {
        result.years.insert(y, filled.iter().map(|rows| rows[t]).collect());
    }
    Ok(result)
}

fn interpolate(points: &[(i32, f64)], year: i32) -> Option<f64> {
    let after = points.partition_point(|p| p.0 < year);
    if let Some(&(y, v)) = points.get(after) {
        if y == year {
            return Some(v);
        }
    }
    if after == 0 || after == points.len() {
        return None;
    }
    let (a, va) = points[after - 1];
    let (b, vb) = points[after];
    let m = (year - a) as f64;
    Some((va + m * (vb - va) / (b - a) as f64).clamp(0.0, 100.0))
}

/// Runs neighbour-mean imputation independently on every (year, feature)
/// slice. The panel's regions must equal the graph's.
pub fn impute_feature_gaps(panel: &FeaturePanel, graph: &RegionGraph) -> Result<FeaturePanel, TemporalError> {
    if panel.regions.as_slice() != graph.regions() {
        return Err(TemporalError::RegionMismatch(format!(
            "panel has {} regions, graph has {}",
            panel.regions.len(),
            graph.len()
        )));
    }
    let slices: Vec<(i32, usize)> = panel
        .years
        .keys()
        .flat_map(|&y| (0..FEATURE_COUNT).map(move |j| (y, j)))
        .collect();
    let results = par::map(&slices, |&(y, j)| -> Result<Option<Vec<f64>>, ImputeError> {
        let column: Vec<Option<f64>> = panel.years[&y].iter().map(|row| row[j]).collect();
        if column.iter().all(Option::is_some) {
            return Ok(None);
        }
        neighbor_mean_aligned(&column, graph).map(|(v, _)| Some(v))
    });
    let mut out = panel.clone();
    for (&(y, j), res) in slices.iter().zip(results) {
        if let Some(col) = res? {
            let rows = out.years.get_mut(&y).expect("year exists");
            for (row, v) in rows.iter_mut().zip(col) {
                row[j] = Some(v);
            }
        }
    }
    Ok(out)
}

/// Reads the wide covariate CSV `fips,year,<13 features>`. Every year must
/// list the same regions.
pub fn read_covariates_csv<R: Read>(reader: R) -> Result<FeaturePanel, TemporalError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    let expected: Vec<&str> = ["fips", "year"].into_iter().chain(FEATURE_NAMES).collect();
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(TemporalError::MalformedRecord(format!(
            "expected header `{}`",
            expected.join(",")
        )));
    }
    let mut by_year: BTreeMap<i32, BTreeMap<RegionId, FeatureRow>> = BTreeMap::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec?;
        let bad = |msg: String| TemporalError::MalformedRecord(format!("line {line}: {msg}"));
        if rec.len() != expected.len() {
            return Err(bad(format!("expected {} fields, found {}", expected.len(), rec.len())));
        }
        let region: RegionId = rec[0].parse().map_err(|e| bad(format!("{e}")))?;
        let year: i32 = rec[1].parse().map_err(|_| bad(format!("bad year {:?}", &rec[1])))?;
        let mut row = [None; FEATURE_COUNT];
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = parse_optional(&rec[j + 2]).map_err(bad)?;
        }
        if by_year.entry(year).or_default().insert(region, row).is_some() {
            return Err(bad(format!("duplicate record for {region} in {year}")));
        }
    }
    let regions: Vec<RegionId> = by_year
        .values()
        .next()
        .map(|m| m.keys().copied().collect())
        .unwrap_or_default();
    let mut panel = FeaturePanel::new(regions.iter().copied());
    for (year, rows) in by_year {
        if !rows.keys().eq(regions.iter()) {
            return Err(TemporalError::RegionMismatch(format!(
                "year {year} lists a different region set"
            )));
        }
        panel.insert_year(year, rows.into_values().collect())?;
    }
    Ok(panel)
}

pub fn write_covariates_csv<W: Write>(panel: &FeaturePanel, writer: W) -> Result<(), TemporalError> {
    let mut w = csv::Writer::from_writer(writer);
    let header: Vec<&str> = ["fips", "year"].into_iter().chain(FEATURE_NAMES).collect();
    w.write_record(&header)?;
    for (year, rows) in &panel.years {
        for (r, row) in panel.regions.iter().zip(rows) {
            let mut rec = vec![r.to_string(), year.to_string()];
            rec.extend(row.iter().map(|v| v.map_or_else(|| "NA".to_string(), fmt_full)));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Areal-weight mapping from old regions to new ones.
#[derive(Debug, Clone, PartialEq)]
pub struct Crosswalk {
    entries: Vec<(RegionId, RegionId, f64)>,
}

impl Crosswalk {
    pub fn new(entries: Vec<(RegionId, RegionId, f64)>) -> Result<Self, TemporalError> {
        let mut totals: BTreeMap<RegionId, f64> = BTreeMap::new();
        for &(s, t, w) in &entries {
            if !w.is_finite() || w < 0.0 {
                return Err(TemporalError::InvalidWeight { source_id: s, target: t, weight: w });
            }
            *totals.entry(t).or_default() += w;
        }
        if let Some((t, _)) = totals.iter().find(|(_, &w)| w <= 0.0) {
            return Err(TemporalError::ZeroWeightTarget(*t));
        }
        Ok(Crosswalk { entries })
    }

    /// Weight 1 from each region to itself.
    pub fn identity(regions: impl IntoIterator<Item = RegionId>) -> Self {
        Crosswalk {
            entries: regions.into_iter().map(|r| (r, r, 1.0)).collect(),
        }
    }

    pub fn entries(&self) -> &[(RegionId, RegionId, f64)] {
        &self.entries
    }

    pub fn sources(&self) -> BTreeSet<RegionId> {
        self.entries.iter().map(|e| e.0).collect()
    }

    pub fn targets(&self) -> BTreeSet<RegionId> {
        self.entries.iter().map(|e| e.1).collect()
    }
}

/// Area-weighted mean `sum(w * v) / sum(w)` for every crosswalk target.
pub fn apply_crosswalk(field: &RateField, crosswalk: &Crosswalk) -> Result<RateField, TemporalError> {
    // (weighted sum, total weight, lowest source, highest source)
    let mut acc: BTreeMap<RegionId, (f64, f64, f64, f64)> = BTreeMap::new();
    for &(s, t, w) in &crosswalk.entries {
        let v = field.get(&s).flatten().ok_or(TemporalError::MissingSource(s))?;
        let e = acc.entry(t).or_insert((0.0, 0.0, f64::INFINITY, f64::NEG_INFINITY));
        e.0 += w * v;
        e.1 += w;
        if w > 0.0 {
            e.2 = e.2.min(v);
            e.3 = e.3.max(v);
        }
    }
    let mut out = RateField::new(field.year);
    for (t, (num, den, lo, hi)) in acc {
        if den <= 0.0 {
            return Err(TemporalError::ZeroWeightTarget(t));
        }
        // num / den can round one ulp outside the sources' range
        out.set(t, Some((num / den).clamp(lo, hi)))?;
    }
    Ok(out)
}

/// Like [`apply_crosswalk`], but regions that are not crosswalk sources are
/// copied through unchanged (missing values included).
pub fn apply_crosswalk_passthrough(field: &RateField, crosswalk: &Crosswalk) -> Result<RateField, TemporalError> {
    let sources = crosswalk.sources();
    let mut out = apply_crosswalk(field, crosswalk)?;
    for (r, v) in field.iter() {
        if !sources.contains(r) {
            if out.get(r).is_some() {
                return Err(TemporalError::MalformedRecord(format!(
                    "{r} is both a crosswalk target and an untouched input region"
                )));
            }
            out.set(*r, *v)?;
        }
    }
    Ok(out)
}

pub fn read_crosswalk_csv<R: Read>(reader: R) -> Result<Crosswalk, TemporalError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["source_fips", "target_fips", "weight"] {
        return Err(TemporalError::MalformedRecord(
            "expected header `source_fips,target_fips,weight`".into(),
        ));
    }
    let mut entries = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec?;
        let bad = |msg: String| TemporalError::MalformedRecord(format!("line {line}: {msg}"));
        let s: RegionId = rec[0].parse().map_err(|e| bad(format!("{e}")))?;
        let t: RegionId = rec[1].parse().map_err(|e| bad(format!("{e}")))?;
        let w: f64 = rec[2].parse().map_err(|_| bad(format!("bad weight {:?}", &rec[2])))?;
        entries.push((s, t, w));
    }
    Crosswalk::new(entries)
}

pub fn write_crosswalk_csv<W: Write>(crosswalk: &Crosswalk, writer: W) -> Result<(), TemporalError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["source_fips", "target_fips", "weight"])?;
    for (s, t, wt) in &crosswalk.entries {
        w.write_record([s.to_string(), t.to_string(), fmt_full(*wt)])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
