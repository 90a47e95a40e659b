//! Choropleth property injection into a base GeoJSON FeatureCollection.

use std::collections::BTreeMap;

use serde_json::{Map, Value};
use thiserror::Error;

use crate::anomaly::AnomalyLabeling;
use crate::io::fmt_sig6;
use crate::rates::RateField;
use crate::region::RegionId;

#[derive(Debug, Error)]
pub enum GeoJsonError {
    #[error("base GeoJSON is not a FeatureCollection")]
    NotFeatureCollection,
    #[error("feature {0} lacks a valid `fips` property")]
    MissingFips(usize),
    #[error("GeoJSON regions absent from the data: {}", .0.join(", "))]
    FipsMismatch(Vec<String>),
}

/// Empirical percentile of each available value: the share of other values
/// strictly below plus half of the other tied values, over `n - 1`, so the
/// minimum maps to 0 and the maximum to 100.
pub fn empirical_percentiles(field: &RateField) -> BTreeMap<RegionId, f64> {
    let mut values = field.available();
    values.sort_by(f64::total_cmp);
    let n = values.len();
    field
        .iter()
        .filter_map(|(r, v)| v.map(|v| (*r, v)))
        .map(|(r, v)| {
            if n < 2 {
                return (r, 100.0);
            }
            let below = values.partition_point(|&x| x < v);
            let not_above = values.partition_point(|&x| x <= v);
            let others_tied = (not_above - below - 1) as f64;
            (r, 100.0 * (below as f64 + 0.5 * others_tied) / (n - 1) as f64)
        })
        .collect()
}

fn rounded(x: f64) -> Value {
    fmt_sig6(x)
        .parse::<f64>()
        .ok()
        .and_then(serde_json::Number::from_f64)
        .map_or(Value::Null, Value::Number)
}

/// Copies `base` and adds `rate`/`percentile` (when a field is given) and
/// `anomaly` (when a labeling is given) to each feature's properties.
/// Geometry is left untouched.
pub fn emit_geojson(
    field: Option<&RateField>,
    labeling: Option<&AnomalyLabeling>,
    base: &Value,
) -> Result<Value, GeoJsonError> {
    let mut out = base.clone();
    if out.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(GeoJsonError::NotFeatureCollection);
    }
    let features = out
        .get_mut("features")
        .and_then(Value::as_array_mut)
        .ok_or(GeoJsonError::NotFeatureCollection)?;
    let percentiles = field.map(empirical_percentiles);
    let mut unmatched = Vec::new();
    for (k, feature) in features.iter_mut().enumerate() {
        let fips = feature
            .get("properties")
            .and_then(|p| p.get("fips"))
            .and_then(Value::as_str)
            .and_then(|s| s.parse::<RegionId>().ok())
            .ok_or(GeoJsonError::MissingFips(k))?;
        let mut added = Map::new();
        if let Some(f) = field {
            match f.get(&fips) {
                None => {
                    unmatched.push(fips.to_string());
                    continue;
                }
                Some(v) => {
                    added.insert("rate".into(), v.map_or(Value::Null, rounded));
                    let p = percentiles.as_ref().and_then(|p| p.get(&fips)).copied();
                    added.insert("percentile".into(), p.map_or(Value::Null, rounded));
                }
            }
        }
        if let Some(lab) = labeling {
            added.insert("anomaly".into(), Value::String(lab.label_of(&fips).name().into()));
        }
        let props = feature
            .get_mut("properties")
            .and_then(Value::as_object_mut)
            .ok_or(GeoJsonError::MissingFips(k))?;
        props.extend(added);
    }
    if !unmatched.is_empty() {
        return Err(GeoJsonError::FipsMismatch(unmatched));
    }
    Ok(out)
}
