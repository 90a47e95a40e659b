//! Filling missing rates.
//!
//! [`neighbor_mean_impute`] is the step-wise queen-neighbour scheme. A pass
//! with count `k` imputes every missing region that has exactly `k` missing
//! neighbours at the start of the pass, using the mean of its available
//! neighbours. All reads within a pass use the pass-start snapshot, so the
//! result does not depend on processing order. Passes run for
//! `k = 1, 2, ..., max degree` and the cycle repeats while it makes progress,
//! with counts recomputed at every pass start. Missing regions whose
//! neighbours are all available wait until the end and take the mean of their
//! full neighbourhood. Islands use their constructed neighbourhoods.
//!
//! National-mean, state-mean and inverse-distance-weighting imputers are the
//! comparison baselines.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::graph::RegionGraph;
use crate::par;
use crate::rates::{RateError, RateField};
use crate::region::RegionId;

#[derive(Debug, Error)]
pub enum ImputeError {
    #[error("no available rates to impute from")]
    NoDataAvailable,
    #[error("missing region {0} has no available data anywhere in its connected component")]
    UnreachableRegion(RegionId),
    #[error("island {0} has no constructed neighbourhood")]
    EmptyNeighborhood(RegionId),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Rates(#[from] RateError),
}

/// Outcome of the neighbour-mean schedule for one index-aligned slice.
#[derive(Debug, Clone, PartialEq)]
pub struct PassTrace {
    /// `(k, regions imputed)` for every non-empty pass, in order. The final
    /// all-neighbours-available phase is recorded with `k = 0`.
    pub passes: Vec<(usize, Vec<usize>)>,
}

pub(crate) fn neighbor_mean_aligned(
    values: &[Option<f64>],
    graph: &RegionGraph,
) -> Result<(Vec<f64>, PassTrace), ImputeError> {
    let mut current: Vec<Option<f64>> = values.to_vec();
    let mut remaining: Vec<usize> = (0..current.len()).filter(|&i| current[i].is_none()).collect();
    let mut trace = PassTrace { passes: Vec::new() };

    for &r in &remaining {
        if graph.neighborhood(r).is_empty() {
            return Err(ImputeError::EmptyNeighborhood(graph.id(r)));
        }
    }
    let max_k = remaining
        .iter()
        .map(|&r| graph.neighborhood(r).len())
        .max()
        .unwrap_or(0);

    let missing_count = |snap: &[Option<f64>], r: usize| {
        graph.neighborhood(r).iter().filter(|&&j| snap[j].is_none()).count()
    };

    loop {
        if !remaining.iter().any(|&r| missing_count(&current, r) > 0) {
            break;
        }
        let mut progressed = false;
        for k in 1..=max_k {
            let snapshot = current.clone();
            let ready: Vec<usize> = remaining
                .iter()
                .copied()
                .filter(|&r| {
                    let nb = graph.neighborhood(r);
                    let missing = missing_count(&snapshot, r);
                    missing == k && missing < nb.len()
                })
                .collect();
            if ready.is_empty() {
                continue;
            }
            let imputed = par::map(&ready, |&r| available_mean(&snapshot, graph.neighborhood(r)));
            for (&r, v) in ready.iter().zip(imputed) {
                current[r] = Some(v);
            }
            remaining.retain(|r| current[*r].is_none());
            trace.passes.push((k, ready));
            progressed = true;
        }
        if !progressed {
            let stuck = remaining
                .iter()
                .copied()
                .find(|&r| missing_count(&current, r) > 0)
                .expect("loop guard found a region with missing neighbours");
            return Err(ImputeError::UnreachableRegion(graph.id(stuck)));
        }
    }

    if !remaining.is_empty() {
        let snapshot = current.clone();
        let imputed = par::map(&remaining, |&r| available_mean(&snapshot, graph.neighborhood(r)));
        for (&r, v) in remaining.iter().zip(imputed) {
            current[r] = Some(v);
        }
        trace.passes.push((0, remaining));
    }

    let out = current
        .into_iter()
        .map(|v| v.expect("every region imputed"))
        .collect();
    Ok((out, trace))
}

fn available_mean(snapshot: &[Option<f64>], neighborhood: &[usize]) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for &j in neighborhood {
        if let Some(v) = snapshot[j] {
            sum += v;
            n += 1;
        }
    }
    sum / n as f64
}

/// Step-wise queen-neighbour mean imputation.
pub fn neighbor_mean_impute(field: &RateField, graph: &RegionGraph) -> Result<RateField, ImputeError> {
    neighbor_mean_impute_traced(field, graph).map(|(f, _)| f)
}

/// Like [`neighbor_mean_impute`], also returning the pass schedule.
pub fn neighbor_mean_impute_traced(
    field: &RateField,
    graph: &RegionGraph,
) -> Result<(RateField, PassTrace), ImputeError> {
    let aligned = field.aligned(graph)?;
    let (values, trace) = neighbor_mean_aligned(&aligned, graph)?;
    let opt: Vec<Option<f64>> = values.into_iter().map(Some).collect();
    Ok((RateField::from_aligned(field.year, graph, &opt), trace))
}

pub fn national_mean_impute(field: &RateField) -> Result<RateField, ImputeError> {
    let available = field.available();
    if available.is_empty() {
        return Err(ImputeError::NoDataAvailable);
    }
    let mean = available.iter().sum::<f64>() / available.len() as f64;
    let mut out = field.clone();
    for r in field.missing() {
        out.set(r, Some(mean))?;
    }
    Ok(out)
}

/// State means, falling back to the national mean for states with no data.
pub fn state_mean_impute(field: &RateField, graph: &RegionGraph) -> Result<RateField, ImputeError> {
    let aligned = field.aligned(graph)?;
    let mut national = (0.0, 0usize);
    let mut by_state: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for (i, v) in aligned.iter().enumerate() {
        if let Some(v) = v {
            national.0 += v;
            national.1 += 1;
            let e = by_state.entry(graph.state_of(i)).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
    }
    if national.1 == 0 {
        return Err(ImputeError::NoDataAvailable);
    }
    let national_mean = national.0 / national.1 as f64;
    let filled: Vec<Option<f64>> = aligned
        .iter()
        .enumerate()
        .map(|(i, v)| {
            v.or_else(|| {
                Some(match by_state.get(graph.state_of(i)) {
                    Some(&(s, n)) if n > 0 => s / n as f64,
                    _ => national_mean,
                })
            })
        })
        .collect();
    Ok(RateField::from_aligned(field.year, graph, &filled))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdwOptions {
    pub power: f64,
    /// Restrict donors to the nearest `n` available regions; `None` uses all.
    pub max_donors: Option<usize>,
}

impl Default for IdwOptions {
    fn default() -> Self {
        IdwOptions {
            power: 1.0,
            max_donors: None,
        }
    }
}

/// Inverse-distance weighting over available regions, weights `1 / d^power`.
/// A donor whose centroid coincides with the target decides the value outright
/// (mean of all coincident donors).
pub fn idw_impute(
    field: &RateField,
    graph: &RegionGraph,
    options: IdwOptions,
) -> Result<RateField, ImputeError> {
    if !(options.power.is_finite() && options.power > 0.0) {
        return Err(ImputeError::InvalidParameter(format!(
            "IDW power must be positive, got {}",
            options.power
        )));
    }
    if options.max_donors == Some(0) {
        return Err(ImputeError::InvalidParameter("max_donors must be at least 1".into()));
    }
    let aligned = field.aligned(graph)?;
    let donors: Vec<(usize, f64)> = aligned
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .collect();
    if donors.is_empty() {
        return Err(ImputeError::NoDataAvailable);
    }
    let missing: Vec<usize> = (0..aligned.len()).filter(|&i| aligned[i].is_none()).collect();
    let imputed = par::map(&missing, |&i| idw_value(graph, i, &donors, options));
    let mut filled = aligned;
    for (&i, v) in missing.iter().zip(imputed) {
        filled[i] = Some(v);
    }
    Ok(RateField::from_aligned(field.year, graph, &filled))
}

fn idw_value(graph: &RegionGraph, target: usize, donors: &[(usize, f64)], options: IdwOptions) -> f64 {
    let mut with_d: Vec<(f64, usize, f64)> = donors
        .iter()
        .map(|&(j, v)| (graph.distance(target, j), j, v))
        .collect();
    let coincident: Vec<f64> = with_d.iter().filter(|d| d.0 == 0.0).map(|d| d.2).collect();
    if !coincident.is_empty() {
        return coincident.iter().sum::<f64>() / coincident.len() as f64;
    }
    if let Some(k) = options.max_donors {
        if k < with_d.len() {
            with_d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            with_d.truncate(k);
            with_d.sort_by_key(|d| d.1);
        }
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (d, _, v) in with_d {
        let w = d.powf(-options.power);
        num += w * v;
        den += w;
    }
    num / den
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ImputeMethod {
    NationalMean,
    StateMean,
    Idw,
    NeighborMean,
}

impl ImputeMethod {
    pub const ALL: [ImputeMethod; 4] = [
        ImputeMethod::NationalMean,
        ImputeMethod::StateMean,
        ImputeMethod::Idw,
        ImputeMethod::NeighborMean,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ImputeMethod::NationalMean => "national_mean",
            ImputeMethod::StateMean => "state_mean",
            ImputeMethod::Idw => "idw",
            ImputeMethod::NeighborMean => "neighbor_mean",
        }
    }

    pub fn apply(
        &self,
        field: &RateField,
        graph: &RegionGraph,
        idw: IdwOptions,
    ) -> Result<RateField, ImputeError> {
        match self {
            ImputeMethod::NationalMean => national_mean_impute(field),
            ImputeMethod::StateMean => state_mean_impute(field, graph),
            ImputeMethod::Idw => idw_impute(field, graph, idw),
            ImputeMethod::NeighborMean => neighbor_mean_impute(field, graph),
        }
    }
}

impl fmt::Display for ImputeMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ImputeMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ImputeMethod::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| format!("unknown imputation method {s:?}"))
    }
}
