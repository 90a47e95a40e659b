//! Queen-adjacency region graph with centroids and constructed island
//! neighbourhoods.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};

use serde::Deserialize;
use thiserror::Error;

use crate::region::RegionId;

/// Mean Earth radius (IUGG) in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Default size of constructed island neighbourhoods.
pub const DEFAULT_ISLAND_NEIGHBORS: usize = 5;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("adjacency references region {0} which has no centroid")]
    MissingCentroid(RegionId),
    #[error("need {needed} mainland regions to build island neighbourhoods, found {found}")]
    InsufficientMainland { needed: usize, found: usize },
    #[error("unknown region {0}")]
    UnknownRegion(RegionId),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Geographic point in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub fn new(lat: f64, lon: f64) -> Self {
        LatLon { lat, lon }
    }

    pub fn is_valid(&self) -> bool {
        self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon)
    }
}

/// Great-circle (haversine) distance in kilometres on a sphere of radius
/// [`EARTH_RADIUS_KM`].
pub fn geodesic_distance(a: LatLon, b: LatLon) -> f64 {
    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let dphi = (b.lat - a.lat).to_radians();
    let dlambda = (b.lon - a.lon).to_radians();
    let s1 = (dphi / 2.0).sin();
    let s2 = (dlambda / 2.0).sin();
    let h = (s1 * s1 + phi1.cos() * phi2.cos() * s2 * s2).clamp(0.0, 1.0);
    2.0 * EARTH_RADIUS_KM * h.sqrt().asin()
}

/// Immutable region substrate. Regions are stored in ascending id order and
/// addressed internally by that index.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionGraph {
    regions: Vec<RegionId>,
    index: HashMap<RegionId, usize>,
    neighbors: Vec<Vec<usize>>,
    centroids: Vec<LatLon>,
    constructed: Vec<Vec<usize>>,
}

pub fn load_graph(
    adjacency: &[(RegionId, RegionId)],
    centroids: &[(RegionId, f64, f64)],
) -> Result<RegionGraph, GraphError> {
    let mut points: BTreeMap<RegionId, LatLon> = BTreeMap::new();
    for &(id, lat, lon) in centroids {
        let p = LatLon::new(lat, lon);
        if !p.is_valid() {
            return Err(GraphError::MalformedRecord(format!(
                "centroid for {id} out of range: ({lat}, {lon})"
            )));
        }
        if let Some(prev) = points.insert(id, p) {
            if prev != p {
                return Err(GraphError::MalformedRecord(format!(
                    "conflicting centroid records for {id}"
                )));
            }
        }
    }
    let regions: Vec<RegionId> = points.keys().copied().collect();
    let index: HashMap<RegionId, usize> =
        regions.iter().enumerate().map(|(i, &r)| (r, i)).collect();
    let mut sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); regions.len()];
    for &(a, b) in adjacency {
        if a == b {
            return Err(GraphError::MalformedRecord(format!("self-loop on {a}")));
        }
        let ia = *index.get(&a).ok_or(GraphError::MissingCentroid(a))?;
        let ib = *index.get(&b).ok_or(GraphError::MissingCentroid(b))?;
        sets[ia].insert(ib);
        sets[ib].insert(ia);
    }
    let neighbors = sets.into_iter().map(|s| s.into_iter().collect()).collect();
    let centroids = points.into_values().collect();
    let n = regions.len();
    Ok(RegionGraph {
        regions,
        index,
        neighbors,
        centroids,
        constructed: vec![Vec::new(); n],
    })
}

impl RegionGraph {
    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn regions(&self) -> &[RegionId] {
        &self.regions
    }

    pub fn index_of(&self, id: &RegionId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn contains(&self, id: &RegionId) -> bool {
        self.index.contains_key(id)
    }

    pub fn id(&self, idx: usize) -> RegionId {
        self.regions[idx]
    }

    pub fn neighbor_indices(&self, idx: usize) -> &[usize] {
        &self.neighbors[idx]
    }

    pub fn constructed_indices(&self, idx: usize) -> &[usize] {
        &self.constructed[idx]
    }

    /// Queen neighbours, or the constructed neighbourhood for an island.
    pub fn neighborhood(&self, idx: usize) -> &[usize] {
        if self.neighbors[idx].is_empty() {
            &self.constructed[idx]
        } else {
            &self.neighbors[idx]
        }
    }

    pub fn neighbors(&self, id: &RegionId) -> Option<Vec<RegionId>> {
        let i = self.index_of(id)?;
        Some(self.neighbors[i].iter().map(|&j| self.regions[j]).collect())
    }

    pub fn constructed(&self, id: &RegionId) -> Option<Vec<RegionId>> {
        let i = self.index_of(id)?;
        Some(self.constructed[i].iter().map(|&j| self.regions[j]).collect())
    }

    pub fn centroid(&self, idx: usize) -> LatLon {
        self.centroids[idx]
    }

    pub fn state_of(&self, idx: usize) -> &str {
        self.regions[idx].state()
    }

    pub fn is_island(&self, idx: usize) -> bool {
        self.neighbors[idx].is_empty()
    }

    pub fn islands(&self) -> Vec<RegionId> {
        (0..self.len())
            .filter(|&i| self.is_island(i))
            .map(|i| self.regions[i])
            .collect()
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        geodesic_distance(self.centroids[a], self.centroids[b])
    }

    /// Undirected edges, each listed once with the smaller id first.
    pub fn edges(&self) -> Vec<(RegionId, RegionId)> {
        let mut out = Vec::new();
        for (i, ns) in self.neighbors.iter().enumerate() {
            for &j in ns {
                if i < j {
                    out.push((self.regions[i], self.regions[j]));
                }
            }
        }
        out
    }

    pub fn centroid_records(&self) -> Vec<(RegionId, f64, f64)> {
        self.regions
            .iter()
            .zip(&self.centroids)
            .map(|(&r, p)| (r, p.lat, p.lon))
            .collect()
    }

    /// Gives every island the `k` nearest mainland regions by centroid
    /// distance, ties broken by ascending id. Mainland regions are untouched.
    pub fn attach_island_neighbors(mut self, k: usize) -> Result<Self, GraphError> {
        let islands: Vec<usize> = (0..self.len()).filter(|&i| self.is_island(i)).collect();
        if islands.is_empty() {
            return Ok(self);
        }
        let mainland: Vec<usize> = (0..self.len()).filter(|&i| !self.is_island(i)).collect();
        if k == 0 || mainland.len() < k {
            return Err(GraphError::InsufficientMainland {
                needed: k.max(1),
                found: mainland.len(),
            });
        }
        for &island in &islands {
            let mut by_distance: Vec<(f64, usize)> = mainland
                .iter()
                .map(|&m| (self.distance(island, m), m))
                .collect();
            // index order equals id order
            by_distance.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut chosen: Vec<usize> = by_distance.iter().take(k).map(|&(_, m)| m).collect();
            chosen.sort_unstable();
            self.constructed[island] = chosen;
        }
        Ok(self)
    }

    /// Checks the structural invariants; used by tests and after loading.
    pub fn validate(&self) -> Result<(), String> {
        for (i, ns) in self.neighbors.iter().enumerate() {
            for &j in ns {
                if j == i {
                    return Err(format!("self-loop at {}", self.regions[i]));
                }
                if self.neighbors[j].binary_search(&i).is_err() {
                    return Err(format!(
                        "asymmetric edge {} -> {}",
                        self.regions[i], self.regions[j]
                    ));
                }
            }
            if !self.constructed[i].is_empty() && !ns.is_empty() {
                return Err(format!(
                    "non-island {} has a constructed neighbourhood",
                    self.regions[i]
                ));
            }
            if !self.centroids[i].is_valid() {
                return Err(format!("invalid centroid at {}", self.regions[i]));
            }
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct AdjacencyRow {
    fips: String,
    neighbor_fips: String,
}

#[derive(Deserialize)]
struct CentroidRow {
    fips: String,
    lat: String,
    lon: String,
}

fn parse_id(s: &str, line: u64) -> Result<RegionId, GraphError> {
    s.parse()
        .map_err(|e| GraphError::MalformedRecord(format!("line {line}: {e}")))
}

fn parse_coord(s: &str, what: &str, line: u64) -> Result<f64, GraphError> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| GraphError::MalformedRecord(format!("line {line}: bad {what} {s:?}")))
}

/// Reads `fips,neighbor_fips` rows.
pub fn read_adjacency_csv<R: Read>(reader: R) -> Result<Vec<(RegionId, RegionId)>, GraphError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (k, row) in rdr.deserialize::<AdjacencyRow>().enumerate() {
        let line = k as u64 + 2;
        let row = row.map_err(|e| GraphError::MalformedRecord(format!("line {line}: {e}")))?;
        out.push((parse_id(&row.fips, line)?, parse_id(&row.neighbor_fips, line)?));
    }
    Ok(out)
}

/// Reads `fips,lat,lon` rows.
pub fn read_centroids_csv<R: Read>(reader: R) -> Result<Vec<(RegionId, f64, f64)>, GraphError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (k, row) in rdr.deserialize::<CentroidRow>().enumerate() {
        let line = k as u64 + 2;
        let row = row.map_err(|e| GraphError::MalformedRecord(format!("line {line}: {e}")))?;
        out.push((
            parse_id(&row.fips, line)?,
            parse_coord(&row.lat, "latitude", line)?,
            parse_coord(&row.lon, "longitude", line)?,
        ));
    }
    Ok(out)
}

pub fn write_adjacency_csv<W: Write>(graph: &RegionGraph, writer: W) -> Result<(), GraphError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["fips", "neighbor_fips"])?;
    for (a, b) in graph.edges() {
        w.write_record([a.as_str(), b.as_str()])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Coordinates are written with full round-trip precision.
pub fn write_centroids_csv<W: Write>(graph: &RegionGraph, writer: W) -> Result<(), GraphError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["fips", "lat", "lon"])?;
    for (r, lat, lon) in graph.centroid_records() {
        w.write_record([r.as_str(), &format!("{lat:?}"), &format!("{lon:?}")])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
