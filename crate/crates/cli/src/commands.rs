use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::Deserialize;

use mortmap::anomaly::{
    label_anomalies, nonzero_rates, rank_features, select_best, tail_sweep, write_labels_csv, AnomalyError,
    AnomalyLabeling, SetKind,
};
use mortmap::autoenc::{
    attribution_scores, expected_gradients, forward, rescale_features, train, write_log_csv, Optimizer, TrainConfig,
    TrainingPair,
};
use mortmap::benchmark::{
    censor, compare_methods, efficacy_report, mask_seed, summary_stats, write_bench_csv, write_mask_csv,
    CompareOptions,
};
use mortmap::gbt::{boost, cv_predict, gain_importance, CvConfig, GbtEnsemble, Grid};
use mortmap::geojson::emit_geojson;
use mortmap::graph::{load_graph, read_adjacency_csv, read_centroids_csv, write_adjacency_csv, write_centroids_csv, RegionGraph};
use mortmap::impute::{IdwOptions, ImputeMethod};
use mortmap::io::fmt_sig6;
use mortmap::linalg::Matrix;
use mortmap::ranking::FeatureScores;
use mortmap::rates::{read_rates_csv, write_rates_csv, RateField, RatePanel};
use mortmap::region::RegionId;
use mortmap::rng::derive_seed;
use mortmap::synth::{generate, LatticeSpec, SynthConfig};
use mortmap::temporal::{
    apply_crosswalk_passthrough, impute_feature_gaps, linear_gap_fill, read_covariates_csv, read_crosswalk_csv,
    write_covariates_csv, write_crosswalk_csv, FeaturePanel, FEATURE_COUNT, FEATURE_NAMES,
};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::manifest::Run;

fn read_graph(run: &mut Run) -> Result<RegionGraph> {
    let edges = read_adjacency_csv(run.open_input("adjacency")?)?;
    let centroids = read_centroids_csv(run.open_input("centroids")?)?;
    let k: usize = run.config.parse("island_neighbors")?;
    Ok(load_graph(&edges, &centroids)?.attach_island_neighbors(k)?)
}

/// Fields of the panel inside the configured year range.
fn read_panel(run: &mut Run, key: &str) -> Result<Vec<RateField>> {
    let panel = read_rates_csv(run.open_input(key)?)?;
    let (a, b) = run.config.year_range()?;
    let fields: Vec<RateField> = panel.into_fields().into_iter().filter(|f| (a..=b).contains(&f.year)).collect();
    if fields.is_empty() {
        return Err(CliError::data(format!("{key} has no years within {a}..{b}")));
    }
    Ok(fields)
}

fn read_covariates(run: &mut Run) -> Result<FeaturePanel> {
    Ok(read_covariates_csv(run.open_input("covariates")?)?)
}

fn require_complete(fields: &[RateField], what: &str) -> Result<()> {
    match fields.iter().find(|f| !f.is_complete()) {
        Some(f) => Err(CliError::data(format!(
            "{what} for {} has {} missing rates; run `impute` first",
            f.year,
            f.missing_count()
        ))),
        None => Ok(()),
    }
}

fn write_json(run: &mut Run, rel: &str, value: &impl serde::Serialize) -> Result<()> {
    let mut w = run.create(rel)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn write_scores(run: &mut Run, prefix: &str, value_column: &str, scores: &FeatureScores) -> Result<()> {
    scores.write_yearly_csv(value_column, run.create(&format!("{prefix}_yearly.csv"))?)?;
    scores.write_ranking_csv(run.create(&format!("{prefix}_ranking.csv"))?)?;
    Ok(())
}

fn write_predictions(run: &mut Run, rel: &str, rows: &[(i32, Vec<(RegionId, f64)>)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(run.create(rel)?);
    w.write_record(["fips", "year", "prediction"])?;
    for (year, preds) in rows {
        let y = year.to_string();
        for (r, p) in preds {
            w.write_record([r.as_str(), y.as_str(), fmt_sig6(*p).as_str()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn synth(cfg: &RunConfig) -> Result<()> {
    let mut run = Run::new("synth", cfg)?;
    let lattice = match cfg.raw("synth_lattice") {
        "national" => LatticeSpec::national(),
        other => {
            let (r, c) = other
                .split_once('x')
                .and_then(|(r, c)| Some((r.parse::<usize>().ok()?, c.parse::<usize>().ok()?)))
                .filter(|&(r, c)| r > 0 && c > 0 && r * c >= 2)
                .ok_or_else(|| CliError::config(format!("synth_lattice = {other:?}: expected `national` or RxC")))?;
            LatticeSpec::rectangle(r, c, 8)
        }
    };
    let seed: u64 = cfg.parse("synth_seed")?;
    let config = SynthConfig { seed, lattice, ..SynthConfig::default() };
    let data = generate(&config)?;
    run.seeds = vec![seed];
    write_adjacency_csv(&data.graph, run.create("adjacency.csv")?)?;
    write_centroids_csv(&data.graph, run.create("centroids.csv")?)?;
    write_rates_csv(data.truth.fields(), run.create("rates_truth.csv")?)?;
    write_rates_csv(data.observed.fields(), run.create("rates.csv")?)?;
    write_covariates_csv(&data.covariates, run.create("covariates.csv")?)?;
    write_crosswalk_csv(&data.crosswalk, run.create("crosswalk.csv")?)?;
    write_json(&mut run, "base.geojson", &data.geojson)?;
    run.note("regions", data.graph.len());
    run.note("suppressed", data.observed.fields().map(|f| f.missing_count()).sum::<usize>());
    run.note("release_years", &config.release_years);
    run.finish()?;
    Ok(())
}

pub fn impute(cfg: &RunConfig) -> Result<()> {
    let mut run = Run::new("impute", cfg)?;
    let graph = read_graph(&mut run)?;
    let fields = read_panel(&mut run, "rates")?;
    let method: ImputeMethod = cfg.parse("impute_method")?;
    let idw = idw_options(cfg)?;
    let mut imputed = Vec::new();
    let mut counts = BTreeMap::new();
    for f in &fields {
        counts.insert(f.year.to_string(), f.missing_count());
        imputed.push(method.apply(f, &graph, idw).map_err(|e| CliError::from(e).context(f.year))?);
    }
    write_rates_csv(&imputed, run.create("imputed_rates.csv")?)?;
    run.note("imputations_total", counts.values().sum::<usize>());
    run.note("imputations_by_year", counts);
    run.finish()?;
    Ok(())
}

fn idw_options(cfg: &RunConfig) -> Result<IdwOptions> {
    let max_donors = match cfg.raw("idw_max_donors") {
        "all" | "" => None,
        _ => Some(cfg.parse::<usize>("idw_max_donors")?),
    };
    Ok(IdwOptions { power: cfg.parse("idw_power")?, max_donors })
}

pub fn bench(cfg: &RunConfig) -> Result<()> {
    let mut run = Run::new("bench", cfg)?;
    let graph = read_graph(&mut run)?;
    let key = if cfg.is_set("truth") { "truth" } else { "rates" };
    let fields = read_panel(&mut run, key)?;
    require_complete(&fields, "benchmark truth")?;
    let options = CompareOptions {
        fraction: cfg.parse("fraction")?,
        seeds: cfg.seeds()?,
        methods: cfg.list("methods")?,
        idw: idw_options(cfg)?,
    };
    let panel = RatePanel::new(fields)?;
    let rows = compare_methods(&panel, &graph, &options)?;
    write_bench_csv(&rows, run.create("bench.csv")?)?;
    if cfg.flag("write_masks")? {
        for field in panel.fields() {
            for &seed in &options.seeds {
                let (_, mask) = censor(field, options.fraction, mask_seed(seed, field.year))?;
                write_mask_csv(&mask, run.create(&format!("masks/mask_{}_{seed}.csv", field.year))?)?;
            }
        }
    }
    run.seeds = options.seeds;
    run.note("mask_seed_rule", "splitmix64(derive_seed(seed, year))");
    run.finish()?;
    Ok(())
}

pub fn crosswalk(cfg: &RunConfig) -> Result<()> {
    let mut run = Run::new("crosswalk", cfg)?;
    let fields = read_panel(&mut run, "rates")?;
    let cw = read_crosswalk_csv(run.open_input("crosswalk")?)?;
    let years: Vec<i32> = cfg.list("crosswalk_years")?;
    let mut out = Vec::new();
    for y in &years {
        let f = fields
            .iter()
            .find(|f| f.year == *y)
            .ok_or_else(|| CliError::data(format!("rates have no year {y}")))?;
        out.push(apply_crosswalk_passthrough(f, &cw).map_err(|e| CliError::from(e).context(y))?);
    }
    write_rates_csv(&out, run.create("crosswalk_rates.csv")?)?;
    run.note("sources", cw.sources().len());
    run.note("targets", cw.targets().len());
    run.finish()?;
    Ok(())
}

pub fn covariates_fill(cfg: &RunConfig) -> Result<()> {
    let mut run = Run::new("covariates-fill", cfg)?;
    let graph = read_graph(&mut run)?;
    let panel = read_covariates(&mut run)?;
    let observed: BTreeSet<i32> = if cfg.is_set("observed_years") {
        cfg.list("observed_years")?.into_iter().collect()
    } else {
        panel.years().into_iter().collect()
    };
    let (a, b) = cfg.year_range()?;
    let missing_before = panel.missing_count();
    let interpolated = linear_gap_fill(&panel, &observed, a..=b)?;
    let after_interp = interpolated.missing_count();
    let filled = impute_feature_gaps(&interpolated, &graph)?;
    write_covariates_csv(&filled, run.create("covariates_filled.csv")?)?;
    run.note("observed_years", &observed);
    run.note("missing_cells_in_observed_years", missing_before);
    run.note("cells_left_for_spatial_imputation", after_interp);
    run.finish()?;
    Ok(())
}

pub fn anomaly(cfg: &RunConfig) -> Result<()> {
    let mut run = Run::new("anomaly", cfg)?;
    let fields = read_panel(&mut run, "rates")?;
    require_complete(&fields, "rates")?;
    let panel = read_covariates(&mut run)?;
    let base = if cfg.is_set("base_geojson") {
        Some(serde_json::from_reader::<_, serde_json::Value>(std::io::BufReader::new(run.open_input("base_geojson")?))?)
    } else {
        None
    };
    let tail: f64 = cfg.parse("tail")?;
    let tails: Vec<f64> = cfg.list("tails")?;

    let mut fits = csv::Writer::from_writer(run.create("anomaly_fits.csv")?);
    fits.write_record([
        "year", "family", "param1", "param2", "log_likelihood", "ks", "aic", "bic", "aic_rank", "bic_rank",
        "ks_rank", "selected", "failure",
    ])?;
    let mut sweep_w = csv::Writer::from_writer(run.create("anomaly_tails.csv")?);
    sweep_w.write_record(["year", "tail", "q_low", "q_high", "hot", "cold", "zero", "cold_empty"])?;
    let mut labelings: Vec<AnomalyLabeling> = Vec::new();
    let mut selected = BTreeMap::new();
    for f in &fields {
        let sel = select_best(&nonzero_rates(f)).map_err(|e| CliError::from(e).context(f.year))?;
        for row in &sel.table {
            let rank = |r: Option<usize>| r.map_or(String::new(), |r| r.to_string());
            let (p, ll, ks, aic, bic) = match &row.fit {
                Some(fit) => (
                    fit.dist.params().map(fmt_sig6),
                    fmt_sig6(fit.log_likelihood),
                    fmt_sig6(fit.ks_statistic),
                    fmt_sig6(fit.aic),
                    fmt_sig6(fit.bic),
                ),
                None => Default::default(),
            };
            fits.write_record([
                f.year.to_string(),
                row.family.name().to_string(),
                p[0].clone(),
                p[1].clone(),
                ll,
                ks,
                aic,
                bic,
                rank(row.aic_rank),
                rank(row.bic_rank),
                rank(row.ks_rank),
                (row.family == sel.best.dist.family()).to_string(),
                row.failure.clone().unwrap_or_default(),
            ])?;
        }
        selected.insert(f.year.to_string(), sel.best.dist.family().name());
        for s in tail_sweep(f, &sel.best.dist, &tails)? {
            let l = &s.labeling;
            sweep_w.write_record([
                f.year.to_string(),
                fmt_sig6(l.tail),
                fmt_sig6(l.q_low),
                fmt_sig6(l.q_high),
                s.hot_count.to_string(),
                s.cold_count.to_string(),
                l.zero.len().to_string(),
                s.cold_empty.to_string(),
            ])?;
        }
        labelings.push(label_anomalies(f, &sel.best.dist, tail)?);
    }
    fits.flush()?;
    sweep_w.flush()?;
    drop((fits, sweep_w));
    let refs: Vec<&RateField> = fields.iter().collect();
    write_labels_csv(&refs, &labelings, run.create("anomaly_labels.csv")?)?;

    let mut empty_sets = Vec::new();
    for kind in SetKind::ALL {
        match rank_features(&labelings, &panel, kind) {
            Ok(report) => {
                write_scores(&mut run, &format!("anomaly_{kind}"), "mean", &report.scores)?;
                if !report.skipped_years.is_empty() {
                    run.note(&format!("{kind}_skipped_years"), &report.skipped_years);
                }
            }
            Err(AnomalyError::EmptyAnomalySet(_)) => {
                log::warn!("no {kind} regions in any year; ranking not written");
                empty_sets.push(kind.name());
            }
            Err(e) => return Err(e.into()),
        }
    }
    if let Some(base) = &base {
        for (f, lab) in fields.iter().zip(&labelings) {
            let gj = emit_geojson(Some(f), Some(lab), base)?;
            write_json(&mut run, &format!("geojson/anomaly_{}.geojson", f.year), &gj)?;
        }
    }
    run.note("selected_family", selected);
    run.note("empty_sets", empty_sets);
    run.finish()?;
    Ok(())
}

/// Covariates of year `t` against rates of `t + 1`, aligned to the panel's
/// region order.
fn paired_targets(panel: &FeaturePanel, target: &RateField) -> Result<Vec<f64>> {
    panel
        .regions()
        .iter()
        .map(|r| {
            target
                .get(r)
                .flatten()
                .ok_or_else(|| CliError::data(format!("no {} rate for {r}", target.year)))
        })
        .collect()
}

fn model_years(fields: &[RateField], panel: &FeaturePanel, last_input: i32) -> Vec<i32> {
    fields
        .iter()
        .map(|f| f.year - 1)
        .filter(|&t| t <= last_input && panel.has_year(t))
        .collect()
}

pub fn gbt(cfg: &RunConfig) -> Result<()> {
    let mut run = Run::new("gbt", cfg)?;
    let fields = read_panel(&mut run, "rates")?;
    require_complete(&fields, "rates")?;
    let panel = read_covariates(&mut run)?;
    let grid = Grid {
        n_trees: cfg.list("gbt_trees")?,
        max_depth: cfg.list("gbt_depth")?,
        min_leaf: cfg.list("gbt_min_leaf")?,
    };
    if grid.configs().is_empty() {
        return Err(CliError::config("the boosted-tree grid is empty"));
    }
    let seed: u64 = cfg.parse("seed")?;
    let cv = CvConfig { folds: cfg.parse("folds")?, grid, learning_rate: cfg.parse("gbt_lr")?, seed };
    let (_, end) = cfg.year_range()?;

    let mut predictions = Vec::new();
    let mut models: BTreeMap<i32, GbtEnsemble> = BTreeMap::new();
    let mut grid_w = csv::Writer::from_writer(run.create("gbt_grid.csv")?);
    grid_w.write_record(["year", "n_trees", "max_depth", "min_leaf", "cv_mae", "chosen"])?;
    for t in model_years(&fields, &panel, end - 1) {
        let target = fields.iter().find(|f| f.year == t + 1).expect("model year has a target");
        let x = panel.matrix(t)?;
        let y = paired_targets(&panel, target)?;
        let res = cv_predict(&x, &y, &cv).map_err(|e| CliError::from(e).context(t + 1))?;
        for (p, mae) in &res.grid_scores {
            grid_w.write_record([
                (t + 1).to_string(),
                p.n_trees.to_string(),
                p.max_depth.to_string(),
                p.min_leaf.to_string(),
                fmt_sig6(*mae),
                (*p == res.chosen).to_string(),
            ])?;
        }
        predictions.push((t + 1, panel.regions().iter().copied().zip(res.oof.iter().copied()).collect()));
        models.insert(t + 1, boost(&x, &y, res.chosen, cv.learning_rate)?);
    }
    grid_w.flush()?;
    drop(grid_w);
    if models.is_empty() {
        return Err(CliError::data("no (covariate year, next-year rates) pairs in range"));
    }
    write_predictions(&mut run, "gbt_predictions.csv", &predictions)?;
    let refs: Vec<(i32, &GbtEnsemble)> = models.iter().map(|(y, m)| (*y, m)).collect();
    let importance = gain_importance(&refs)?;
    write_scores(&mut run, "gbt_importance", "score", &importance)?;
    write_json(&mut run, "gbt_models.json", &models)?;
    run.seeds = vec![seed];
    run.note("top_feature", FEATURE_NAMES[importance.top()]);
    run.finish()?;
    Ok(())
}

pub fn ae(cfg: &RunConfig) -> Result<()> {
    let mut run = Run::new("ae", cfg)?;
    let fields = read_panel(&mut run, "rates")?;
    require_complete(&fields, "rates")?;
    let panel = read_covariates(&mut run)?;
    let seed: u64 = cfg.parse("seed")?;
    let train_end: i32 = cfg.parse("ae_train_end")?;
    let test_year: i32 = cfg.parse("ae_test_year")?;
    let optimizer = match cfg.raw("ae_optimizer") {
        "adam" => Optimizer::Adam,
        "sgd" => Optimizer::Sgd,
        other => return Err(CliError::config(format!("ae_optimizer = {other:?}: expected adam or sgd"))),
    };
    let config = TrainConfig {
        d1: cfg.parse("ae_d1")?,
        d2: cfg.parse("ae_d2")?,
        max_epochs: cfg.parse("ae_epochs")?,
        patience: cfg.parse("ae_patience")?,
        lr_base: cfg.parse("ae_lr_base")?,
        lr_peak: cfg.parse("ae_lr_peak")?,
        cycle_epochs: cfg.parse("ae_cycle")?,
        optimizer,
        seed,
        validation_year: cfg.parse("ae_validation_year")?,
    };
    let pair = |t: i32| -> Result<TrainingPair> {
        let target = fields
            .iter()
            .find(|f| f.year == t + 1)
            .ok_or_else(|| CliError::data(format!("rates have no year {}", t + 1)))?;
        Ok(TrainingPair {
            input_year: t,
            x: rescale_features(&panel.matrix(t)?),
            y: paired_targets(&panel, target)?,
        })
    };
    let pairs: Vec<TrainingPair> = model_years(&fields, &panel, train_end)
        .into_iter()
        .map(pair)
        .collect::<Result<_>>()?;
    let outcome = train(&pairs, &config)?;
    write_log_csv(&outcome.log, run.create("ae_training_log.csv")?)?;
    write_json(&mut run, "ae_checkpoint.json", &outcome.params)?;

    // predictions for every pair plus the held-out test year
    let mut inputs: Vec<(i32, Matrix)> = pairs.iter().map(|p| (p.input_year, p.x.clone())).collect();
    let has_test = panel.has_year(test_year) && !inputs.iter().any(|(t, _)| *t == test_year);
    if has_test {
        inputs.push((test_year, rescale_features(&panel.matrix(test_year)?)));
    }
    let mut predictions = Vec::new();
    for (t, x) in &inputs {
        let (out, _) = forward(&outcome.params, x)?;
        predictions.push((t + 1, panel.regions().iter().copied().zip(out).collect()));
    }
    write_predictions(&mut run, "ae_predictions.csv", &predictions)?;

    let baselines: Vec<Matrix> = pairs
        .iter()
        .filter(|p| p.target_year() != config.validation_year)
        .map(|p| p.x.clone())
        .collect();
    let samples: usize = cfg.parse("shap_samples")?;
    let mut shap = BTreeMap::new();
    for (t, x) in &inputs {
        shap.insert(t + 1, expected_gradients(&outcome.params, x, &baselines, samples, derive_seed(seed, *t as u64))?);
    }
    write_scores(&mut run, "ae_shap", "mean_abs_shap", &attribution_scores(&shap))?;
    run.seeds = vec![seed];
    run.note("best_epoch", outcome.best_epoch);
    run.note("best_val_l1", outcome.best_val_l1);
    run.note("epochs_run", outcome.log.len());
    run.note("test_prediction_year", has_test.then_some(test_year + 1));
    run.finish()?;
    Ok(())
}

#[derive(Deserialize)]
struct PredictionRow {
    fips: String,
    year: i32,
    prediction: f64,
}

pub fn report(cfg: &RunConfig) -> Result<()> {
    let mut run = Run::new("report", cfg)?;
    let fields = read_panel(&mut run, "rates")?;
    let base = if cfg.is_set("base_geojson") {
        Some(serde_json::from_reader::<_, serde_json::Value>(std::io::BufReader::new(run.open_input("base_geojson")?))?)
    } else {
        None
    };

    let mut summary = csv::Writer::from_writer(run.create("summary_stats.csv")?);
    summary.write_record(["year", "n", "mean", "std", "min", "q1", "median", "q3", "max"])?;
    for f in &fields {
        let s = summary_stats(f)?;
        summary.write_record(
            std::iter::once(f.year.to_string())
                .chain(std::iter::once(s.n.to_string()))
                .chain([s.mean, s.std, s.min, s.q1, s.median, s.q3, s.max].map(fmt_sig6)),
        )?;
    }
    summary.flush()?;
    drop(summary);

    if cfg.is_set("predictions") {
        let mut by_year: BTreeMap<i32, Vec<(RegionId, Option<f64>)>> = BTreeMap::new();
        let mut rdr = csv::Reader::from_reader(run.open_input("predictions")?);
        for row in rdr.deserialize::<PredictionRow>() {
            let row = row?;
            let id: RegionId = row.fips.parse().map_err(|e: mortmap::region::RegionIdError| CliError::data(e.0))?;
            by_year.entry(row.year).or_default().push((id, Some(row.prediction)));
        }
        let mut eff = csv::Writer::from_writer(run.create("efficacy.csv")?);
        eff.write_record(["year", "n", "avg_error", "max_error", "avg_accuracy"])?;
        let mut per_region = csv::Writer::from_writer(run.create("efficacy_regions.csv")?);
        per_region.write_record(["fips", "year", "error", "accuracy"])?;
        for (year, preds) in by_year {
            let Some(truth) = fields.iter().find(|f| f.year == year) else {
                log::warn!("no rates for predicted year {year}; skipped");
                continue;
            };
            let pred = RateField::from_pairs(year, preds)?;
            let truth = RateField::from_pairs(
                year,
                pred.regions().map(|r| (*r, truth.get(r).flatten())),
            )?;
            let rep = efficacy_report(&pred, &truth)?;
            eff.write_record([
                year.to_string(),
                rep.errors.len().to_string(),
                fmt_sig6(rep.avg_error),
                fmt_sig6(rep.max_error),
                fmt_sig6(rep.avg_accuracy),
            ])?;
            for (r, e) in &rep.errors {
                per_region.write_record([r.as_str(), &year.to_string(), &fmt_sig6(*e), &fmt_sig6(rep.accuracy[r])])?;
            }
        }
        eff.flush()?;
        per_region.flush()?;
    }

    if let Some(base) = &base {
        for f in &fields {
            let gj = emit_geojson(Some(f), None, base)?;
            write_json(&mut run, &format!("geojson/rates_{}.geojson", f.year), &gj)?;
        }
    }
    run.note("years", fields.iter().map(|f| f.year).collect::<Vec<_>>());
    run.note("features", FEATURE_COUNT);
    run.finish()?;
    Ok(())
}
