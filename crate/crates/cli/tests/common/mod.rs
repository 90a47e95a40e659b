#![allow(dead_code)]

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

pub fn mortmap(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mortmap"))
        .args(args)
        .current_dir(dir)
        .env_remove("MORTMAP_OUT")
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

pub fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = mortmap(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub const DATA: &str = "rates = data/rates.csv
truth = data/rates_truth.csv
covariates = data/covariates.csv
adjacency = data/adjacency.csv
centroids = data/centroids.csv
crosswalk = data/crosswalk.csv
base_geojson = data/base.geojson
";

/// A directory holding `run.cfg` and a synthetic data set under `data/`.
pub fn workspace(lattice: &str, extra: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.cfg"), format!("{DATA}synth_lattice = {lattice}\n{extra}")).unwrap();
    ok(dir.path(), &["synth", "--config", "run.cfg", "--out", "data"]);
    dir
}

pub fn manifest(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}
