mod common;

use std::fs;
use std::process::Command;

use common::{manifest, mortmap, ok, workspace};
use mortmap::benchmark::{censor, mask_seed, read_mask_csv, score};
use mortmap::graph::{load_graph, read_adjacency_csv, read_centroids_csv};
use mortmap::impute::{IdwOptions, ImputeMethod};
use mortmap::io::fmt_sig6;
use mortmap::rates::read_rates_csv;

#[test]
fn unknown_subcommand_prints_usage_and_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = mortmap(dir.path(), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(mortmap_cli::run(["mortmap", "frobnicate"]), 1);
    assert_eq!(mortmap_cli::run(["mortmap", "--help"]), 0);
}

#[test]
fn exit_codes_follow_failure_class() {
    let w = workspace("3x4", "");
    let d = w.path();
    // unknown key
    assert_eq!(mortmap(d, &["impute", "--config", "run.cfg", "--set", "colour=red"]).status.code(), Some(1));
    // out-of-range tail
    assert_eq!(mortmap(d, &["anomaly", "--config", "run.cfg", "--set", "tail=0.7"]).status.code(), Some(1));
    // required path unset
    assert_eq!(mortmap(d, &["impute", "--set", "rates=data/rates.csv"]).status.code(), Some(1));
    // missing input file
    assert_eq!(mortmap(d, &["impute", "--config", "run.cfg", "--set", "rates=data/nope.csv"]).status.code(), Some(2));
    // suppressed cells where a complete panel is required
    assert_eq!(mortmap(d, &["gbt", "--config", "run.cfg"]).status.code(), Some(2));

    // a constant positive field leaves every family without a fit
    let mut csv = String::from("fips,year,rate\n");
    let truth = read_rates_csv(fs::File::open(d.join("data/rates_truth.csv")).unwrap()).unwrap();
    for r in truth.get(2010).unwrap().regions() {
        csv.push_str(&format!("{r},2010,5.0\n"));
    }
    fs::write(d.join("flat.csv"), csv).unwrap();
    let out = mortmap(
        d,
        &["anomaly", "--config", "run.cfg", "--set", "rates=flat.csv", "--set", "year_end=2010"],
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn out_dir_falls_back_to_environment() {
    let w = workspace("3x4", "");
    let d = w.path();
    let out = Command::new(env!("CARGO_BIN_EXE_mortmap"))
        .args(["impute", "--config", "run.cfg"])
        .current_dir(d)
        .env("MORTMAP_OUT", "from_env")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(d.join("from_env/imputed_rates.csv").exists());
    ok(d, &["impute", "--config", "run.cfg"]);
    assert!(d.join("out/manifest_impute.json").exists());
}

#[test]
fn impute_on_complete_panel_is_identity() {
    let w = workspace("4x5", "");
    let d = w.path();
    ok(d, &["impute", "--config", "run.cfg", "--set", "rates=data/rates_truth.csv"]);
    assert_eq!(
        fs::read(d.join("out/imputed_rates.csv")).unwrap(),
        fs::read(d.join("data/rates_truth.csv")).unwrap()
    );
    let m = manifest(&d.join("out/manifest_impute.json"));
    assert_eq!(m["notes"]["imputations_total"], 0);
    assert_eq!(m["inputs"]["rates"]["path"], "data/rates_truth.csv");
}

#[test]
fn bench_matches_manual_composition() {
    let w = workspace("2x5", "");
    let d = w.path();
    ok(
        d,
        &[
            "bench", "--config", "run.cfg", "--set", "seeds=3", "--set", "methods=neighbor_mean", "--set",
            "year_start=2012", "--set", "year_end=2012", "--set", "write_masks=true",
        ],
    );
    let edges = read_adjacency_csv(fs::File::open(d.join("data/adjacency.csv")).unwrap()).unwrap();
    let centroids = read_centroids_csv(fs::File::open(d.join("data/centroids.csv")).unwrap()).unwrap();
    let graph = load_graph(&edges, &centroids).unwrap();
    assert_eq!(graph.len(), 10);
    let truth = read_rates_csv(fs::File::open(d.join("data/rates_truth.csv")).unwrap()).unwrap();
    let truth = truth.get(2012).unwrap();

    let (masked, mask) = censor(truth, 0.5, mask_seed(3, 2012)).unwrap();
    let imputed = ImputeMethod::NeighborMean.apply(&masked, &graph, IdwOptions::default()).unwrap();
    let m = score(&imputed, truth, &mask).unwrap();

    let text = fs::read_to_string(d.join("out/bench.csv")).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[..3], ["2012", "neighbor_mean", "1"]);
    assert_eq!(row[3], fmt_sig6(m.mae));
    assert_eq!(row[4], fmt_sig6(m.rmse));
    assert_eq!(row[6], fmt_sig6(m.mape));

    let written = read_mask_csv(std::io::BufReader::new(fs::File::open(d.join("out/masks/mask_2012_3.csv")).unwrap()))
        .unwrap();
    assert_eq!(written.masked, mask.masked);
    assert_eq!(manifest(&d.join("out/manifest_bench.json"))["seeds"], serde_json::json!([3]));
}
