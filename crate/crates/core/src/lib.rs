//! Geospatial statistical-learning toolkit for county-level mortality rates.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod anomaly;
pub mod autoenc;
pub mod benchmark;
pub mod gbt;
pub mod geojson;
pub mod graph;
pub mod impute;
pub mod io;
pub mod linalg;
pub mod par;
pub mod ranking;
pub mod rates;
pub mod region;
pub mod rng;
pub mod synth;
pub mod temporal;

pub use graph::{geodesic_distance, load_graph, LatLon, RegionGraph};
pub use rates::{RateField, RatePanel};
pub use region::RegionId;
