//! Acceptance suite. Prints one PASS/FAIL/SKIP line per criterion and fails
//! if any evaluated criterion fails.
//!
//! Criterion 3 runs only when `MORTMAP_REAL_DATA` names a directory holding
//! `rates.csv`, `adjacency.csv` and `centroids.csv` with a complete panel.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use mortmap::anomaly::{fit_mle, ks_statistic, select_best, tail_sweep, Distribution, Family, DEFAULT_TAILS};
use mortmap::autoenc::*;
use mortmap::benchmark::{compare_methods, BenchRow, CompareOptions};
use mortmap::gbt::{boost, cv_predict, find_best_split, fold_assignment, gain_importance, CvConfig, Grid, TreeParams};
use mortmap::graph::{load_graph, read_adjacency_csv, read_centroids_csv, DEFAULT_ISLAND_NEIGHBORS};
use mortmap::impute::{neighbor_mean_impute, IdwOptions, ImputeMethod};
use mortmap::linalg::Matrix;
use mortmap::rates::{read_rates_csv, RateField, RatePanel};
use mortmap::region::RegionId;
use mortmap::rng::SplitMix64;
use mortmap::synth::{lattice_graph, smooth_field, LatticeSpec, SmoothSpec};
use mortmap::temporal::{apply_crosswalk, linear_gap_fill, Crosswalk, FeaturePanel, FEATURE_COUNT};
use rand::SeedableRng;
use rand_distr::Distribution as _;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let out = f();
    let t = start.elapsed();
    let note = format!("; {:.2}s of {}s", t.as_secs_f64(), limit.as_secs());
    match out {
        Outcome::Pass(d) if t < limit => Outcome::Pass(d + &note),
        Outcome::Pass(d) | Outcome::Fail(d) => Outcome::Fail(d + &note),
        skip => skip,
    }
}

fn imputation_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..200 {
        let (g, values) = common::random_grid_field(seed);
        let field = common::field_of(&g.graph, 2014, &values);
        let got = neighbor_mean_impute(&field, &g.graph).unwrap().aligned(&g.graph).unwrap();
        let want = common::neighbor_mean_oracle(&g.neighbors, &values).expect("grid is connected");
        for (a, b) in got.iter().zip(&want) {
            worst = worst.max((a.unwrap() - b).abs());
        }
    }
    verdict(worst <= 1e-12, format!("200 grids, max diff {worst:.1e}"))
}

fn mae_of(rows: &[BenchRow], m: ImputeMethod) -> f64 {
    rows.iter().find(|r| r.method == m).unwrap().mae
}

fn benchmark_ordering() -> (Outcome, String) {
    let g = lattice_graph(&LatticeSpec::rectangle(30, 30, 8)).unwrap();
    let spec = SmoothSpec { noise: 2.0, ..SmoothSpec::default() };
    let panel = RatePanel::new([smooth_field(&g, 2014, &spec, 7)]).unwrap();
    // IDW restricted to the nearest 8 donors, the size of a queen neighbourhood
    let nearby = CompareOptions { idw: IdwOptions { power: 1.0, max_donors: Some(8) }, ..CompareOptions::default() };
    let rows = compare_methods(&panel, &g, &nearby).unwrap();
    let (nm, sm, nat, idw) = (
        mae_of(&rows, ImputeMethod::NeighborMean),
        mae_of(&rows, ImputeMethod::StateMean),
        mae_of(&rows, ImputeMethod::NationalMean),
        mae_of(&rows, ImputeMethod::Idw),
    );
    let gap = (nm - idw).abs() / idw;
    let all = compare_methods(&panel, &g, &CompareOptions::default()).unwrap();
    let idw_all = mae_of(&all, ImputeMethod::Idw);
    let note = format!(
        "all-donor IDW (default) MAE {idw_all:.3}, gap to neighbour mean {:.1}%",
        100.0 * (nm - idw_all).abs() / idw_all
    );
    (
        verdict(
            nm < sm && sm < nat && gap < 0.15,
            format!("MAE neighbour {nm:.3} < state {sm:.3} < national {nat:.3}; nearest-8 IDW {idw:.3}, gap {:.1}%", 100.0 * gap),
        ),
        note,
    )
}

const TABLE_MAE: [(i32, [f64; 4]); 7] = [
    (2014, [5.67, 4.37, 3.35, 3.38]),
    (2015, [6.23, 4.63, 3.69, 3.71]),
    (2016, [7.54, 5.34, 4.21, 4.20]),
    (2017, [8.20, 5.73, 4.54, 4.53]),
    (2018, [7.83, 5.46, 4.33, 4.33]),
    (2019, [7.82, 5.84, 4.59, 4.60]),
    (2020, [10.37, 7.60, 6.08, 6.09]),
];

fn real_data_bands() -> Outcome {
    let Some(dir) = std::env::var_os("MORTMAP_REAL_DATA") else {
        return Outcome::Skip("set MORTMAP_REAL_DATA to a directory with rates.csv, adjacency.csv, centroids.csv".into());
    };
    let dir = std::path::PathBuf::from(dir);
    let open = |name: &str| std::fs::File::open(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    let panel = read_rates_csv(open("rates.csv")).unwrap();
    let edges = read_adjacency_csv(open("adjacency.csv")).unwrap();
    let centroids = read_centroids_csv(open("centroids.csv")).unwrap();
    let g = load_graph(&edges, &centroids)
        .unwrap()
        .attach_island_neighbors(DEFAULT_ISLAND_NEIGHBORS)
        .unwrap();
    let fields: Vec<RateField> = panel
        .fields()
        .filter(|f| TABLE_MAE.iter().any(|(y, _)| *y == f.year))
        .cloned()
        .collect();
    if fields.iter().any(|f| !f.is_complete()) {
        return Outcome::Skip("supplied panel has missing rates in 2014-2020".into());
    }
    let rows = compare_methods(&RatePanel::new(fields).unwrap(), &g, &CompareOptions::default()).unwrap();
    let mut misses = Vec::new();
    for (year, want) in TABLE_MAE {
        for (m, w) in ImputeMethod::ALL.iter().zip(want) {
            if let Some(r) = rows.iter().find(|r| r.year == year && r.method == *m) {
                if (r.mae - w).abs() > 0.1 * w {
                    misses.push(format!("{year} {} {:.2} vs {w}", m.name(), r.mae));
                }
            }
        }
    }
    verdict(misses.is_empty(), format!("outside 10% band: [{}]", misses.join("; ")))
}

fn distribution_fitting() -> Outcome {
    let mut rng = rand::rngs::StdRng::seed_from_u64(42);
    let ln_draws: Vec<f64> = rand_distr::LogNormal::new(3.1, 0.45).unwrap().sample_iter(&mut rng).take(100_000).collect();
    let fit = fit_mle(&ln_draws, Family::Lognormal).unwrap();
    let logs: Vec<f64> = ln_draws.iter().map(|x| x.ln()).collect();
    let mu = logs.iter().sum::<f64>() / logs.len() as f64;
    let sigma = (logs.iter().map(|l| (l - mu).powi(2)).sum::<f64>() / logs.len() as f64).sqrt();
    let [fm, fs] = fit.dist.params();
    let moments_ok = (fm - mu).abs() < 1e-9 && (fs - sigma).abs() < 1e-9;

    let cases: [(Family, [f64; 2], Vec<f64>); 3] = [
        (Family::Gamma, [2.5, 8.0], rand_distr::Gamma::new(2.5, 8.0).unwrap().sample_iter(&mut rng).take(100_000).collect()),
        (Family::Weibull, [1.8, 25.0], rand_distr::Weibull::new(25.0, 1.8).unwrap().sample_iter(&mut rng).take(100_000).collect()),
        (
            Family::InverseGaussian,
            [20.0, 60.0],
            rand_distr::InverseGaussian::new(20.0, 60.0).unwrap().sample_iter(&mut rng).take(100_000).collect(),
        ),
    ];
    let mut worst: f64 = 0.0;
    for (family, truth, draws) in &cases {
        let p = fit_mle(draws, *family).unwrap().dist.params();
        for (a, b) in p.iter().zip(truth) {
            worst = worst.max((a - b).abs() / b);
        }
    }
    let sel = select_best(&ln_draws).unwrap();
    let ln_row = sel.table.iter().find(|r| r.family == Family::Lognormal).unwrap();
    let picks = sel.best.dist.family() == Family::Lognormal
        && ln_row.aic_rank == Some(1)
        && ln_row.bic_rank == Some(1)
        && ln_row.ks_rank == Some(1);
    verdict(
        moments_ok && worst < 0.05 && picks,
        format!(
            "lognormal moment diff ({:.1e}, {:.1e}); worst relative parameter error {:.2}%; lognormal ranked first by AIC/BIC/KS: {picks}",
            (fm - mu).abs(),
            (fs - sigma).abs(),
            100.0 * worst
        ),
    )
}

fn ks_exactness() -> Outcome {
    let d = Distribution::Lognormal { mu: 2.0, sigma: 0.7 };
    let mut worst: f64 = 0.0;
    for n in [1usize, 10, 100] {
        let xs: Vec<f64> = (0..n).map(|i| d.quantile((i as f64 + 0.5) / n as f64)).collect();
        worst = worst.max((ks_statistic(&xs, &d) - 0.5 / n as f64).abs());
    }
    verdict(worst <= 1e-12, format!("max |D - 1/(2n)| = {worst:.1e}"))
}

fn anomaly_monotonicity() -> Outcome {
    let d = Distribution::Lognormal { mu: 3.0, sigma: 0.5 };
    let regions: Vec<RegionId> = (1..=400).map(|i| RegionId::from_parts(6, i).unwrap()).collect();
    let mut monotone = true;
    for seed in 0..50 {
        let mut rng = SplitMix64::new(seed);
        let field = RateField::from_pairs(
            2016,
            regions.iter().map(|r| {
                let v = if rng.next_f64() < 0.05 { 0.0 } else { d.quantile(rng.next_f64().clamp(1e-6, 1.0 - 1e-6)) };
                (*r, Some(v))
            }),
        )
        .unwrap();
        let sweep = tail_sweep(&field, &d, &DEFAULT_TAILS).unwrap();
        monotone &= sweep.windows(2).all(|w| w[0].hot_count <= w[1].hot_count && w[0].cold_count <= w[1].cold_count);
    }
    // no mass below the 1.5% quantile
    let field = RateField::from_pairs(
        2016,
        regions.iter().enumerate().map(|(i, r)| (*r, Some(d.quantile(0.015 + 0.97 * i as f64 / 399.0)))),
    )
    .unwrap();
    let sweep = tail_sweep(&field, &d, &DEFAULT_TAILS).unwrap();
    let constructed = sweep[0].cold_empty && sweep[0].cold_count == 0 && sweep[1].cold_count > 0;
    verdict(
        monotone && constructed,
        format!(
            "50 random fields monotone: {monotone}; constructed cold counts {:?}",
            sweep.iter().map(|s| s.cold_count).collect::<Vec<_>>()
        ),
    )
}

fn gbt_checks() -> Outcome {
    let mut mismatches = 0;
    for seed in 0..100 {
        let (y, cols, min_leaf) = common::split_instance(1000 + seed);
        if find_best_split(&y, &cols, min_leaf) != common::split_oracle(&y, &cols, min_leaf) {
            mismatches += 1;
        }
    }
    let mut rng = SplitMix64::new(9);
    let n = 400;
    let x = Matrix::from_vec(n, FEATURE_COUNT, (0..n * FEATURE_COUNT).map(|_| 100.0 * rng.next_f64()).collect());
    let y: Vec<f64> = (0..n).map(|i| 0.4 * x[(i, 4)] + 0.5 * rng.next_f64()).collect();
    let params = TreeParams { n_trees: 40, max_depth: 3, min_leaf: 5 };
    let e1 = boost(&x, &y, params, 0.1).unwrap();
    let y2: Vec<f64> = (0..n).map(|i| 0.3 * x[(i, 4)] + 3.0 * rng.next_f64()).collect();
    let e2 = boost(&x, &y2, params, 0.1).unwrap();
    let imp = gain_importance(&[(2016, &e1), (2017, &e2)]).unwrap();
    let sums_ok = imp.yearly.values().all(|v| (v.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    verdict(
        mismatches == 0 && imp.average[4] > 0.9 && imp.top() == 4 && sums_ok,
        format!("{mismatches}/100 oracle mismatches; signal importance {:.4}; yearly sums are 1: {sums_ok}", imp.average[4]),
    )
}

fn cv_partition() -> Outcome {
    let mut rng = SplitMix64::new(3);
    let n = 203;
    let x = Matrix::from_vec(n, FEATURE_COUNT, (0..n * FEATURE_COUNT).map(|_| 100.0 * rng.next_f64()).collect());
    let y: Vec<f64> = (0..n).map(|i| 0.2 * x[(i, 1)] + 0.1 * x[(i, 7)] + rng.next_f64()).collect();
    let grid = Grid { n_trees: vec![10, 20], max_depth: vec![2, 3], min_leaf: vec![5] };
    let cfg = CvConfig { grid, ..CvConfig::default() };
    let res = cv_predict(&x, &y, &cfg).unwrap();
    let mut sizes = vec![0usize; cfg.folds];
    for &f in &res.folds {
        sizes[f] += 1;
    }
    let spread = sizes.iter().max().unwrap() - sizes.iter().min().unwrap();
    let reproducible = fold_assignment(n, cfg.folds, cfg.seed) == res.folds
        && fold_assignment(n, cfg.folds, cfg.seed) == fold_assignment(n, cfg.folds, cfg.seed);
    // each prediction comes from the model that never saw its row
    let mut exact = res.oof.len() == n;
    for k in 0..cfg.folds {
        let train: Vec<usize> = (0..n).filter(|&i| res.folds[i] != k).collect();
        let xt = Matrix::from_rows(&train.iter().map(|&i| x.row(i).to_vec()).collect::<Vec<_>>());
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let e = boost(&xt, &yt, res.chosen, cfg.learning_rate).unwrap();
        for i in (0..n).filter(|&i| res.folds[i] == k) {
            exact &= e.predict_row(x.row(i)) == res.oof[i];
        }
    }
    verdict(
        spread <= 1 && reproducible && exact,
        format!("fold sizes {sizes:?}; reproducible: {reproducible}; out-of-fold predictions match held-out refits: {exact}"),
    )
}

fn gradient_check() -> Outcome {
    let mut rng = SplitMix64::new(2024);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let (mut checked, mut skipped) = (0usize, 0usize);
    for config in 0..50 {
        let n = 4 + rng.next_below(37) as usize;
        let d1 = 2 + rng.next_below(15.min(n as u64 - 1)) as usize;
        let d2 = 1 + rng.next_below(4.min(d1 as u64)) as usize;
        let mut p = NetParams::init(Dims { n, d1, d2 }, Activation::Relu, config).unwrap();
        for b in p.weights_mut().b_e1.iter_mut() {
            *b = 0.05 + 0.1 * rng.next_f64();
        }
        let x = common::jittered_inputs(n, FEATURE_COUNT, &mut rng);
        let y: Vec<f64> = (0..n).map(|_| 2.0 * rng.next_f64() - 1.0).collect();
        let (_, cache) = forward(&p, &x).unwrap();
        let grads = backward(&p, &cache, &y).unwrap();
        let base = common::kinks(&p, &x, &y);
        for (t, g) in grads.parts().iter().enumerate() {
            for k in 0..g.len() {
                let mut plus = p.clone();
                plus.weights_mut().parts_mut()[t][k] += h;
                let mut minus = p.clone();
                minus.weights_mut().parts_mut()[t][k] -= h;
                if common::kinks(&plus, &x, &y) != base || common::kinks(&minus, &x, &y) != base {
                    skipped += 1;
                    continue;
                }
                let fd = (common::ae_loss(&plus, &x, &y) - common::ae_loss(&minus, &x, &y)) / (2.0 * h);
                worst = worst.max((g[k] - fd).abs() / g[k].abs().max(fd.abs()).max(1e-6));
                checked += 1;
            }
        }
    }
    verdict(
        worst < 1e-4,
        format!("{checked} parameters over 50 configurations ({skipped} skipped at kinks), worst relative error {worst:.2e}"),
    )
}

fn expected_gradients_checks() -> Outcome {
    let mut rng = SplitMix64::new(77);
    let dims = Dims { n: 20, d1: 8, d2: 3 };
    let mut p = NetParams::init(dims, Activation::Identity, 5).unwrap();
    p.weights_mut().w_c[2] = 0.0;
    let x = common::jittered_inputs(dims.n, FEATURE_COUNT, &mut rng);
    let baselines: Vec<Matrix> = (0..4).map(|_| common::jittered_inputs(dims.n, FEATURE_COUNT, &mut rng)).collect();
    let shap = expected_gradients(&p, &x, &baselines, 40, 3).unwrap();
    let w = p.weights();
    let g = w.w_e1.matvec_t(&w.w_e2.matvec_t(&w.w_d3.matvec_t(&w.w_d4.matvec_t(&vec![1.0; dims.n]))));
    let mut worst: f64 = 0.0;
    for i in 0..dims.n {
        for j in 0..FEATURE_COUNT {
            let mean_b = baselines.iter().map(|b| b[(i, j)]).sum::<f64>() / baselines.len() as f64;
            worst = worst.max((shap[(i, j)] - g[i] * w.w_c[j] * (x[(i, j)] - mean_b)).abs());
        }
    }
    let zero = shap.column(2).iter().all(|&v| v == 0.0);

    let dims = Dims { n: 30, d1: 12, d2: 4 };
    let mut p = NetParams::init(dims, Activation::Relu, 8).unwrap();
    for b in p.weights_mut().b_e1.iter_mut() {
        *b = 0.2;
    }
    let x = common::jittered_inputs(dims.n, FEATURE_COUNT, &mut rng);
    let baselines: Vec<Matrix> = (0..10).map(|_| common::jittered_inputs(dims.n, FEATURE_COUNT, &mut rng)).collect();
    let shap = expected_gradients(&p, &x, &baselines, 200, 9).unwrap();
    let total = |m: &Matrix| forward(&p, m).unwrap().0.iter().sum::<f64>();
    let fx = total(&x);
    let fb = baselines.iter().map(total).sum::<f64>() / baselines.len() as f64;
    let gap = (shap.as_slice().iter().sum::<f64>() - (fx - fb)).abs() / fx.abs();
    verdict(
        worst <= 1e-10 && zero && gap < 0.02,
        format!("closed-form max diff {worst:.1e}; zero-weight feature exactly 0: {zero}; completeness gap {:.3}%", 100.0 * gap),
    )
}

fn early_stopping() -> Outcome {
    let mut rng = SplitMix64::new(5);
    let n = 16;
    let x = common::jittered_inputs(n, FEATURE_COUNT, &mut rng);
    let y: Vec<f64> = (0..n).map(|i| 10.0 + i as f64).collect();
    let train_pair = TrainingPair { input_year: 2010, x: x.clone(), y: y.clone() };
    let val_pair = TrainingPair { input_year: 2014, x, y: y.iter().map(|v| -v).collect() };
    let cfg = TrainConfig { d1: 8, d2: 2, max_epochs: 60, patience: 10, ..TrainConfig::default() };
    let init = NetParams::init(Dims { n, d1: 8, d2: 2 }, Activation::Relu, 1).unwrap();
    let out = train_from(init, &[&train_pair], &val_pair, &cfg).unwrap();
    let (pred, _) = forward(&out.params, &val_pair.x).unwrap();
    let returned = l1_loss(&pred, &val_pair.y).unwrap();
    let best_logged = out.log.iter().map(|r| r.val_l1).fold(f64::INFINITY, f64::min);
    verdict(
        out.log.len() == out.best_epoch + cfg.patience && returned == best_logged,
        format!(
            "best epoch {}, patience {}, epochs run {}; returned params val L1 {returned:.6} vs best logged {best_logged:.6}",
            out.best_epoch,
            cfg.patience,
            out.log.len()
        ),
    )
}

fn temporal_fill() -> Outcome {
    let r = RegionId::from_parts(35, 39).unwrap();
    let mut panel = FeaturePanel::new([r]);
    let row = |v: Option<f64>| [v; FEATURE_COUNT];
    for (year, v) in [(2010, Some(0.0)), (2014, Some(10.0)), (2016, Some(8.0)), (2018, None), (2020, Some(16.0))] {
        panel.insert_year(year, vec![row(v)]).unwrap();
    }
    let biennial = {
        let mut p = FeaturePanel::new([r]);
        p.insert_year(2014, vec![row(Some(10.0))]).unwrap();
        p.insert_year(2016, vec![row(Some(14.0))]).unwrap();
        linear_gap_fill(&p, &BTreeSet::from([2014, 2016]), 2014..=2016).unwrap()
    };
    let mut quarter = FeaturePanel::new([r]);
    quarter.insert_year(2010, vec![row(Some(0.0))]).unwrap();
    quarter.insert_year(2014, vec![row(Some(4.0))]).unwrap();
    let quarter = linear_gap_fill(&quarter, &BTreeSet::from([2010, 2014]), 2010..=2014).unwrap();
    let rio = linear_gap_fill(&panel, &BTreeSet::from([2010, 2014, 2016, 2018, 2020]), 2016..=2020).unwrap();
    let got = |p: &FeaturePanel, y| p.get(y, &r, 0);
    let ok = [(2011, 1.0), (2012, 2.0), (2013, 3.0)].iter().all(|&(y, v)| got(&quarter, y) == Some(v))
        && got(&biennial, 2015) == Some(12.0)
        && [(2017, 10.0), (2018, 12.0), (2019, 14.0)].iter().all(|&(y, v)| got(&rio, y) == Some(v));
    verdict(
        ok,
        format!(
            "quarter steps {:?}; half step {:?}; unusable 2018 pattern {:?}",
            (2011..=2013).map(|y| got(&quarter, y)).collect::<Vec<_>>(),
            got(&biennial, 2015),
            (2017..=2019).map(|y| got(&rio, y)).collect::<Vec<_>>()
        ),
    )
}

fn crosswalk_convexity() -> Outcome {
    let mut rng = SplitMix64::new(13);
    let mut violations = 0;
    for _ in 0..1000 {
        let ns = 1 + rng.next_below(12) as u32;
        let nt = 1 + rng.next_below(8) as u32;
        let sources: Vec<RegionId> = (1..=ns).map(|i| RegionId::from_parts(9, i).unwrap()).collect();
        let field = RateField::from_pairs(2021, sources.iter().map(|&s| (s, Some(100.0 * rng.next_f64())))).unwrap();
        let mut entries = Vec::new();
        for t in 1..=nt {
            let target = RegionId::from_parts(9, 100 + t).unwrap();
            let k = 1 + rng.next_below(ns as u64) as usize;
            for _ in 0..k {
                let s = sources[rng.next_below(ns as u64) as usize];
                entries.push((s, target, 0.01 + rng.next_f64()));
            }
        }
        let cw = Crosswalk::new(entries.clone()).unwrap();
        let out = apply_crosswalk(&field, &cw).unwrap();
        let mut bounds: BTreeMap<RegionId, (f64, f64)> = BTreeMap::new();
        for (s, t, _) in &entries {
            let v = field.get(s).flatten().unwrap();
            let b = bounds.entry(*t).or_insert((f64::INFINITY, f64::NEG_INFINITY));
            *b = (b.0.min(v), b.1.max(v));
        }
        for (t, (lo, hi)) in bounds {
            let v = out.get(&t).flatten().unwrap();
            if v < lo || v > hi {
                violations += 1;
            }
        }
    }
    let regions: Vec<RegionId> = (1..=50).map(|i| RegionId::from_parts(9, i).unwrap()).collect();
    let field = RateField::from_pairs(2021, regions.iter().map(|&r| (r, Some(rng.next_f64() * 40.0)))).unwrap();
    let identity = apply_crosswalk(&field, &Crosswalk::identity(regions.iter().copied())).unwrap() == field;
    verdict(violations == 0 && identity, format!("{violations} convexity violations in 1000 crosswalks; identity preserved: {identity}"))
}

#[test]
fn acceptance() {
    let mut bench_note = String::new();
    let bench = timed(Duration::from_secs(30), || {
        let (out, note) = benchmark_ordering();
        bench_note = note;
        out
    });
    let results: Vec<(u32, &str, Outcome)> = vec![
        (1, "imputation oracle equivalence", timed(Duration::from_secs(5), imputation_oracle)),
        (2, "benchmark ordering", bench),
        (3, "published imputation errors", real_data_bands()),
        (4, "distribution fitting", timed(Duration::from_secs(20), distribution_fitting)),
        (5, "KS exactness", ks_exactness()),
        (6, "anomaly tail monotonicity", anomaly_monotonicity()),
        (7, "GBT split oracle and importance", timed(Duration::from_secs(60), gbt_checks)),
        (8, "CV partition", cv_partition()),
        (9, "autoencoder gradient check", timed(Duration::from_secs(30), gradient_check)),
        (10, "expected gradients closed form", expected_gradients_checks()),
        (11, "early stopping", early_stopping()),
        (12, "temporal fill exactness", temporal_fill()),
        (13, "crosswalk convexity", crosswalk_convexity()),
    ];
    let mut failed = Vec::new();
    for (id, name, outcome) in &results {
        match outcome {
            Outcome::Pass(d) => println!("PASS [{id}] {name}: {d}"),
            Outcome::Fail(d) => {
                println!("FAIL [{id}] {name}: {d}");
                failed.push(*id);
            }
            Outcome::Skip(d) => println!("SKIP [{id}] {name}: {d}"),
        }
        if *id == 2 {
            println!("     [2] note: {bench_note}");
        }
    }
    println!("NOTE [14] end-to-end determinism: reported by the mortmap-cli acceptance target");
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
