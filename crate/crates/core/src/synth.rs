//! Seeded synthetic fixtures: lattice county graphs, smooth spatial rate
//! fields and a full 13-year panel with covariates, suppression, a boundary
//! crosswalk and base GeoJSON.

use std::collections::BTreeSet;

use crate::graph::{load_graph, GraphError, RegionGraph, DEFAULT_ISLAND_NEIGHBORS};
use crate::rates::{RateField, RatePanel};
use crate::region::RegionId;
use crate::rng::{derive_seed, SplitMix64};
use crate::temporal::{Crosswalk, FeaturePanel, FeatureRow, FEATURE_COUNT};

/// A rectangular lattice of square "counties" with queen adjacency. States
/// are `block x block` tiles; islands are extra regions with no adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSpec {
    pub rows: usize,
    pub cols: usize,
    /// Cells in the last row (`cols` for a full rectangle).
    pub last_row: usize,
    pub block: usize,
    pub origin: (f64, f64),
    pub step: (f64, f64),
    pub islands: Vec<(f64, f64)>,
}

impl LatticeSpec {
    pub fn rectangle(rows: usize, cols: usize, block: usize) -> Self {
        LatticeSpec {
            rows,
            cols,
            last_row: cols,
            block,
            origin: (30.0, -100.0),
            step: (0.25, 0.3),
            islands: Vec::new(),
        }
    }

    /// 3,142 lattice regions plus two islands: 3,144 in total.
    pub fn national() -> Self {
        LatticeSpec {
            rows: 66,
            cols: 48,
            last_row: 22,
            block: 8,
            origin: (25.0, -124.0),
            step: (0.35, 1.2),
            islands: vec![(21.3, -157.8), (19.7, -155.5)],
        }
    }

    fn has_cell(&self, r: usize, c: usize) -> bool {
        r < self.rows && c < self.cols && (r + 1 < self.rows || c < self.last_row)
    }

    pub fn region_count(&self) -> usize {
        (self.rows - 1) * self.cols + self.last_row + self.islands.len()
    }
}

/// Region ids in lattice cell order, then islands.
pub fn lattice_ids(spec: &LatticeSpec) -> Vec<((usize, usize), RegionId)> {
    let blocks_per_row = spec.cols.div_ceil(spec.block);
    let mut counters = std::collections::BTreeMap::<u32, u32>::new();
    let mut out = Vec::new();
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            if !spec.has_cell(r, c) {
                continue;
            }
            let state = ((r / spec.block) * blocks_per_row + c / spec.block + 1) as u32;
            let k = counters.entry(state).or_insert(0);
            *k += 1;
            let id = RegionId::from_parts(state, 2 * *k - 1).expect("lattice fits in FIPS range");
            out.push(((r, c), id));
        }
    }
    out
}

fn island_id(k: usize) -> RegionId {
    RegionId::from_parts(90 + k as u32, 1).expect("island id")
}

/// Builds the lattice graph and attaches constructed island neighbourhoods.
pub fn lattice_graph(spec: &LatticeSpec) -> Result<RegionGraph, GraphError> {
    let cells = lattice_ids(spec);
    let index: std::collections::HashMap<(usize, usize), RegionId> = cells.iter().copied().collect();
    let mut edges = Vec::new();
    let mut centroids = Vec::new();
    for &((r, c), id) in &cells {
        centroids.push((
            id,
            spec.origin.0 + r as f64 * spec.step.0,
            spec.origin.1 + c as f64 * spec.step.1,
        ));
        // forward half of the queen neighbourhood; load_graph symmetrises
        for (dr, dc) in [(0i64, 1i64), (1, -1), (1, 0), (1, 1)] {
            let (nr, nc) = (r as i64 + dr, c as i64 + dc);
            if nr < 0 || nc < 0 {
                continue;
            }
            if let Some(&other) = index.get(&(nr as usize, nc as usize)) {
                edges.push((id, other));
            }
        }
    }
    for (k, &(lat, lon)) in spec.islands.iter().enumerate() {
        centroids.push((island_id(k), lat, lon));
    }
    let g = load_graph(&edges, &centroids)?;
    if spec.islands.is_empty() {
        Ok(g)
    } else {
        g.attach_island_neighbors(DEFAULT_ISLAND_NEIGHBORS)
    }
}

/// Sum of Gaussian bumps over region centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothSpec {
    pub mean: f64,
    pub bumps: usize,
    pub amplitude: f64,
    pub length_km: f64,
    pub noise: f64,
}

impl Default for SmoothSpec {
    fn default() -> Self {
        SmoothSpec {
            mean: 25.0,
            bumps: 12,
            amplitude: 12.0,
            length_km: 150.0,
            noise: 0.5,
        }
    }
}

fn normal(rng: &mut SplitMix64) -> f64 {
    // Box-Muller; 1 - u keeps the logarithm finite
    let u = 1.0 - rng.next_f64();
    let v = rng.next_f64();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

/// Smooth surface values aligned with the graph's region order.
pub fn smooth_surface(graph: &RegionGraph, spec: &SmoothSpec, seed: u64) -> Vec<f64> {
    let mut rng = SplitMix64::new(seed);
    let n = graph.len();
    let bumps: Vec<(usize, f64)> = (0..spec.bumps)
        .map(|_| (rng.next_below(n as u64) as usize, spec.amplitude * (2.0 * rng.next_f64() - 1.0)))
        .collect();
    (0..n)
        .map(|i| {
            let s: f64 = bumps
                .iter()
                .map(|&(c, a)| {
                    let d = graph.distance(i, c) / spec.length_km;
                    a * (-0.5 * d * d).exp()
                })
                .sum();
            spec.mean + s + spec.noise * normal(&mut rng)
        })
        .collect()
}

/// A complete, nonnegative, spatially autocorrelated rate field.
pub fn smooth_field(graph: &RegionGraph, year: i32, spec: &SmoothSpec, seed: u64) -> RateField {
    let values: Vec<Option<f64>> = smooth_surface(graph, spec, seed)
        .into_iter()
        .map(|v| Some(v.max(0.0)))
        .collect();
    RateField::from_aligned(year, graph, &values)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub lattice: LatticeSpec,
    pub first_year: i32,
    pub last_year: i32,
    pub release_years: Vec<i32>,
    /// Share of regions whose rates are suppressed in the observed panel.
    pub suppression: f64,
    /// Share of regions with a true rate of zero.
    pub zero_share: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 20240101,
            lattice: LatticeSpec::national(),
            first_year: 2010,
            last_year: 2022,
            release_years: vec![2010, 2014, 2016, 2018, 2020, 2022],
            suppression: 0.1,
            zero_share: 0.03,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub graph: RegionGraph,
    /// Complete rates for every year.
    pub truth: RatePanel,
    /// Rates with suppressed (missing) entries.
    pub observed: RatePanel,
    /// Covariates at release years only, with scattered gaps.
    pub covariates: FeaturePanel,
    pub crosswalk: Crosswalk,
    pub geojson: serde_json::Value,
}

/// Effect of each covariate (canonical order) on log rates.
pub const SYNTH_EFFECTS: [f64; FEATURE_COUNT] =
    [0.30, 0.55, 0.20, -0.20, 0.05, 0.10, 0.02, 0.15, 0.03, 0.12, 0.10, 0.35, 0.01];

fn percentile_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut out = vec![0.0; n];
    for (rank, &i) in order.iter().enumerate() {
        out[i] = 100.0 * rank as f64 / (n.max(2) - 1) as f64;
    }
    out
}

pub fn generate(config: &SynthConfig) -> Result<SynthData, GraphError> {
    let graph = lattice_graph(&config.lattice)?;
    let n = graph.len();
    let seed = config.seed;
    let years: Vec<i32> = (config.first_year..=config.last_year).collect();

    // latent covariates drift linearly between two smooth surfaces
    let latent_spec = SmoothSpec {
        mean: 0.0,
        bumps: 10,
        amplitude: 1.0,
        length_km: 400.0,
        noise: 0.15,
    };
    let start: Vec<Vec<f64>> = (0..FEATURE_COUNT)
        .map(|j| smooth_surface(&graph, &latent_spec, derive_seed(seed, 100 + j as u64)))
        .collect();
    let end: Vec<Vec<f64>> = (0..FEATURE_COUNT)
        .map(|j| smooth_surface(&graph, &latent_spec, derive_seed(seed, 200 + j as u64)))
        .collect();
    let span = (config.last_year - config.first_year).max(1) as f64;
    let features_at = |year: i32| -> Vec<FeatureRow> {
        let w = (year - config.first_year) as f64 / span;
        let cols: Vec<Vec<f64>> = (0..FEATURE_COUNT)
            .map(|j| {
                let raw: Vec<f64> = (0..n).map(|i| (1.0 - 0.3 * w) * start[j][i] + 0.3 * w * end[j][i]).collect();
                percentile_ranks(&raw)
            })
            .collect();
        (0..n)
            .map(|i| {
                let mut row = [None; FEATURE_COUNT];
                for (j, cell) in row.iter_mut().enumerate() {
                    *cell = Some(cols[j][i]);
                }
                row
            })
            .collect()
    };

    let residual = smooth_surface(
        &graph,
        &SmoothSpec {
            mean: 0.0,
            bumps: 8,
            amplitude: 0.25,
            length_km: 300.0,
            noise: 0.0,
        },
        derive_seed(seed, 300),
    );
    let mut zr = SplitMix64::new(derive_seed(seed, 400));
    let zero_regions: Vec<bool> = (0..n).map(|_| zr.next_f64() < config.zero_share).collect();

    let mut truth = Vec::new();
    let mut observed = Vec::new();
    for &year in &years {
        // rates respond to the previous year's covariates
        let driver = features_at((year - 1).max(config.first_year));
        let mut rng = SplitMix64::new(derive_seed(seed, 500 + year as u64));
        let mut t = Vec::with_capacity(n);
        let mut o = Vec::with_capacity(n);
        for i in 0..n {
            let effect: f64 = (0..FEATURE_COUNT)
                .map(|j| SYNTH_EFFECTS[j] * (driver[i][j].unwrap() - 50.0) / 50.0)
                .sum();
            let log_rate = 20f64.ln() + effect + residual[i] + 0.03 * (year - config.first_year) as f64
                + 0.12 * normal(&mut rng);
            let mut rate = if zero_regions[i] && rng.next_f64() < 0.8 { 0.0 } else { log_rate.exp() };
            rate = (rate * 100.0).round() / 100.0;
            t.push(Some(rate));
            o.push(if rng.next_f64() < config.suppression { None } else { Some(rate) });
        }
        truth.push(RateField::from_aligned(year, &graph, &t));
        observed.push(RateField::from_aligned(year, &graph, &o));
    }

    let mut covariates = FeaturePanel::new(graph.regions().iter().copied());
    let mut gr = SplitMix64::new(derive_seed(seed, 600));
    // one region with an unusable 2018 release
    let unusable = gr.next_below(n as u64) as usize;
    for &year in &config.release_years {
        let mut rows = features_at(year);
        for (i, row) in rows.iter_mut().enumerate() {
            for cell in row.iter_mut() {
                if let Some(v) = cell {
                    *v = (*v * 100.0).round() / 100.0;
                }
                if gr.next_f64() < 0.002 {
                    *cell = None;
                }
            }
            if year == 2018 && i == unusable {
                *row = [None; FEATURE_COUNT];
            }
        }
        covariates.insert_year(year, rows).expect("percentiles in range");
    }

    let crosswalk = boundary_change(&graph, &config.lattice);
    let geojson = base_geojson(&config.lattice, &graph);
    Ok(SynthData {
        graph,
        truth: RatePanel::new(truth).expect("contiguous years"),
        observed: RatePanel::new(observed).expect("contiguous years"),
        covariates,
        crosswalk,
        geojson,
    })
}

/// Re-partitions the first state's first six regions into four new ones with
/// overlapping area weights; all sources keep nonzero total outflow.
fn boundary_change(graph: &RegionGraph, spec: &LatticeSpec) -> Crosswalk {
    let first_state: Vec<RegionId> = lattice_ids(spec)
        .into_iter()
        .map(|(_, id)| id)
        .filter(|id| graph.contains(id))
        .take(6)
        .collect();
    let state = first_state[0].state().parse::<u32>().expect("numeric state");
    let target = |k: u32| RegionId::from_parts(state, 900 + k).expect("target id");
    let s = &first_state;
    let entries = vec![
        (s[0], target(1), 1.0),
        (s[1], target(1), 0.6),
        (s[1], target(2), 0.4),
        (s[2], target(2), 1.0),
        (s[3], target(3), 1.0),
        (s[4], target(3), 0.3),
        (s[4], target(4), 0.7),
        (s[5], target(4), 1.0),
    ];
    Crosswalk::new(entries).expect("positive weights")
}

/// Square polygons per lattice cell (and small squares for islands), each with
/// a `fips` property.
fn base_geojson(spec: &LatticeSpec, graph: &RegionGraph) -> serde_json::Value {
    let square = |lat: f64, lon: f64, h: f64, w: f64| {
        serde_json::json!([[
            [lon - w, lat - h],
            [lon + w, lat - h],
            [lon + w, lat + h],
            [lon - w, lat + h],
            [lon - w, lat - h]
        ]])
    };
    let (h, w) = (spec.step.0 / 2.0, spec.step.1 / 2.0);
    let features: Vec<serde_json::Value> = graph
        .regions()
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let c = graph.centroid(i);
            serde_json::json!({
                "type": "Feature",
                "properties": { "fips": id.as_str() },
                "geometry": { "type": "Polygon", "coordinates": square(c.lat, c.lon, h, w) }
            })
        })
        .collect();
    serde_json::json!({ "type": "FeatureCollection", "features": features })
}

/// Release years as a set, for [`crate::temporal::linear_gap_fill`].
pub fn release_set(config: &SynthConfig) -> BTreeSet<i32> {
    config.release_years.iter().copied().collect()
}
