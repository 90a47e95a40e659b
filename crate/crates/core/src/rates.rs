//! Per-year mortality rate fields (per 100,000 persons) with explicit missing
//! entries.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::Deserialize;
use thiserror::Error;

use crate::graph::RegionGraph;
use crate::io::{fmt_full, parse_optional};
use crate::region::RegionId;

#[derive(Debug, Error)]
pub enum RateError {
    #[error("malformed rate record: {0}")]
    MalformedRecord(String),
    #[error("rate for {region} in {year} must be finite and nonnegative, got {value}")]
    InvalidRate { region: RegionId, year: i32, value: f64 },
    #[error("region sets differ: {0}")]
    RegionMismatch(String),
    #[error("years must be contiguous, gap after {0}")]
    NonContiguousYears(i32),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Rates for one year. `None` marks a missing (suppressed) entry; zero is a
/// valid observation.
#[derive(Debug, Clone, PartialEq)]
pub struct RateField {
    pub year: i32,
    values: BTreeMap<RegionId, Option<f64>>,
}

impl RateField {
    pub fn new(year: i32) -> Self {
        RateField {
            year,
            values: BTreeMap::new(),
        }
    }

    pub fn from_pairs(
        year: i32,
        pairs: impl IntoIterator<Item = (RegionId, Option<f64>)>,
    ) -> Result<Self, RateError> {
        let mut f = RateField::new(year);
        for (r, v) in pairs {
            f.set(r, v)?;
        }
        Ok(f)
    }

    /// Builds a field from values aligned with the graph's region order.
    pub fn from_aligned(year: i32, graph: &RegionGraph, values: &[Option<f64>]) -> Self {
        assert_eq!(values.len(), graph.len(), "aligned length mismatch");
        RateField {
            year,
            values: graph.regions().iter().copied().zip(values.iter().copied()).collect(),
        }
    }

    pub fn set(&mut self, region: RegionId, value: Option<f64>) -> Result<(), RateError> {
        if let Some(v) = value {
            if !v.is_finite() || v < 0.0 {
                return Err(RateError::InvalidRate {
                    region,
                    year: self.year,
                    value: v,
                });
            }
        }
        self.values.insert(region, value);
        Ok(())
    }

    pub fn get(&self, region: &RegionId) -> Option<Option<f64>> {
        self.values.get(region).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&RegionId, &Option<f64>)> {
        self.values.iter()
    }

    pub fn regions(&self) -> impl Iterator<Item = &RegionId> {
        self.values.keys()
    }

    pub fn is_complete(&self) -> bool {
        self.values.values().all(Option::is_some)
    }

    pub fn missing(&self) -> Vec<RegionId> {
        self.values
            .iter()
            .filter(|(_, v)| v.is_none())
            .map(|(r, _)| *r)
            .collect()
    }

    pub fn missing_count(&self) -> usize {
        self.values.values().filter(|v| v.is_none()).count()
    }

    /// Available values in ascending region order.
    pub fn available(&self) -> Vec<f64> {
        self.values.values().filter_map(|v| *v).collect()
    }

    /// Complete values in region order, or `None` if anything is missing.
    pub fn complete_values(&self) -> Option<Vec<f64>> {
        self.values.values().copied().collect()
    }

    /// Values aligned with the graph's region order. The region sets must match.
    pub fn aligned(&self, graph: &RegionGraph) -> Result<Vec<Option<f64>>, RateError> {
        if self.values.len() != graph.len() {
            return Err(RateError::RegionMismatch(format!(
                "field {} has {} regions, graph has {}",
                self.year,
                self.values.len(),
                graph.len()
            )));
        }
        // both sides are sorted by id
        let mut out = Vec::with_capacity(graph.len());
        for ((r, v), g) in self.values.iter().zip(graph.regions()) {
            if r != g {
                return Err(RateError::RegionMismatch(format!(
                    "region {r} not in graph (or {g} missing from field {})",
                    self.year
                )));
            }
            out.push(*v);
        }
        Ok(out)
    }

    pub fn same_regions(&self, other: &RateField) -> bool {
        self.values.len() == other.values.len()
            && self.values.keys().zip(other.values.keys()).all(|(a, b)| a == b)
    }
}

/// Consecutive years of rate fields.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RatePanel {
    fields: BTreeMap<i32, RateField>,
}

impl RatePanel {
    pub fn new(fields: impl IntoIterator<Item = RateField>) -> Result<Self, RateError> {
        let fields: BTreeMap<i32, RateField> = fields.into_iter().map(|f| (f.year, f)).collect();
        let years: Vec<i32> = fields.keys().copied().collect();
        for w in years.windows(2) {
            if w[1] != w[0] + 1 {
                return Err(RateError::NonContiguousYears(w[0]));
            }
        }
        Ok(RatePanel { fields })
    }

    pub fn years(&self) -> Vec<i32> {
        self.fields.keys().copied().collect()
    }

    pub fn get(&self, year: i32) -> Option<&RateField> {
        self.fields.get(&year)
    }

    pub fn fields(&self) -> impl Iterator<Item = &RateField> {
        self.fields.values()
    }

    pub fn into_fields(self) -> Vec<RateField> {
        self.fields.into_values().collect()
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }
}

#[derive(Deserialize)]
struct RateRow {
    fips: String,
    year: String,
    rate: String,
}

/// Reads `fips,year,rate`; empty or `NA` rates are missing.
pub fn read_rates_csv<R: Read>(reader: R) -> Result<RatePanel, RateError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut by_year: BTreeMap<i32, RateField> = BTreeMap::new();
    for (k, row) in rdr.deserialize::<RateRow>().enumerate() {
        let line = k + 2;
        let row = row.map_err(|e| RateError::MalformedRecord(format!("line {line}: {e}")))?;
        let region: RegionId = row
            .fips
            .parse()
            .map_err(|e| RateError::MalformedRecord(format!("line {line}: {e}")))?;
        let year: i32 = row
            .year
            .parse()
            .map_err(|_| RateError::MalformedRecord(format!("line {line}: bad year {:?}", row.year)))?;
        let value = parse_optional(&row.rate)
            .map_err(|e| RateError::MalformedRecord(format!("line {line}: {e}")))?;
        let field = by_year.entry(year).or_insert_with(|| RateField::new(year));
        if field.get(&region).is_some() {
            return Err(RateError::MalformedRecord(format!(
                "line {line}: duplicate record for {region} in {year}"
            )));
        }
        field.set(region, value)?;
    }
    RatePanel::new(by_year.into_values())
}

/// Writes `fips,year,rate` with full precision; missing values are `NA`.
pub fn write_rates_csv<'a, W: Write>(
    fields: impl IntoIterator<Item = &'a RateField>,
    writer: W,
) -> Result<(), RateError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["fips", "year", "rate"])?;
    for field in fields {
        let year = field.year.to_string();
        for (r, v) in field.iter() {
            let cell = v.map_or_else(|| "NA".to_string(), fmt_full);
            w.write_record([r.as_str(), year.as_str(), cell.as_str()])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> RegionId {
        RegionId::new(s).unwrap()
    }

    #[test]
    fn rejects_negative_and_nan() {
        let mut f = RateField::new(2014);
        assert!(f.set(id("01001"), Some(-1.0)).is_err());
        assert!(f.set(id("01001"), Some(f64::NAN)).is_err());
        assert!(f.set(id("01001"), Some(0.0)).is_ok());
        assert!(f.is_complete());
    }

    #[test]
    fn csv_round_trip_with_missing() {
        let text = "fips,year,rate\n01001,2014,3.5\n01003,2014,NA\n01001,2015,\n01003,2015,0\n";
        let panel = read_rates_csv(text.as_bytes()).unwrap();
        assert_eq!(panel.years(), vec![2014, 2015]);
        let f14 = panel.get(2014).unwrap();
        assert_eq!(f14.get(&id("01001")), Some(Some(3.5)));
        assert_eq!(f14.get(&id("01003")), Some(None));
        assert_eq!(panel.get(2015).unwrap().get(&id("01003")), Some(Some(0.0)));
        let mut out = Vec::new();
        write_rates_csv(panel.fields(), &mut out).unwrap();
        let back = read_rates_csv(out.as_slice()).unwrap();
        assert_eq!(back, panel);
    }

    #[test]
    fn duplicate_rows_rejected() {
        let text = "fips,year,rate\n01001,2014,1\n01001,2014,2\n";
        assert!(matches!(
            read_rates_csv(text.as_bytes()),
            Err(RateError::MalformedRecord(_))
        ));
    }

    #[test]
    fn year_gap_rejected() {
        let text = "fips,year,rate\n01001,2014,1\n01001,2016,2\n";
        assert!(matches!(
            read_rates_csv(text.as_bytes()),
            Err(RateError::NonContiguousYears(2014))
        ));
    }
}
