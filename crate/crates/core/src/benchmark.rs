//! Simulated censoring, imputation scoring and prediction efficacy metrics.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::graph::RegionGraph;
use crate::impute::{IdwOptions, ImputeError, ImputeMethod};
use crate::io::fmt_sig6;
use crate::par;
use crate::rates::{RateField, RatePanel};
use crate::region::RegionId;
use crate::rng::{derive_seed, SplitMix64};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("input field {0} already contains missing values")]
    IncompleteInput(i32),
    #[error("censor fraction must lie in [0, 1], got {0}")]
    InvalidFraction(f64),
    #[error("censor mask is empty")]
    EmptyMask,
    #[error("no seeds given")]
    NoSeeds,
    #[error("field is empty")]
    EmptyField,
    #[error("region sets differ: {0}")]
    RegionMismatch(String),
    #[error("malformed mask file: {0}")]
    MalformedMask(String),
    #[error(transparent)]
    Impute(#[from] ImputeError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CensorMask {
    pub year: i32,
    pub masked: BTreeSet<RegionId>,
    pub seed: u64,
    pub fraction: f64,
}

/// Masks each region independently with probability `fraction`. Regions are
/// visited in ascending id order and each consumes one uniform draw from
/// `SplitMix64::new(seed)`; a region is masked when the draw is `< fraction`.
pub fn censor(field: &RateField, fraction: f64, seed: u64) -> Result<(RateField, CensorMask), BenchError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(BenchError::InvalidFraction(fraction));
    }
    if !field.is_complete() {
        return Err(BenchError::IncompleteInput(field.year));
    }
    let mut rng = SplitMix64::new(seed);
    let mut out = field.clone();
    let mut masked = BTreeSet::new();
    for r in field.regions() {
        if rng.next_f64() < fraction {
            masked.insert(*r);
        }
    }
    for r in &masked {
        out.set(*r, None).expect("missing is always valid");
    }
    Ok((
        out,
        CensorMask {
            year: field.year,
            masked,
            seed,
            fraction,
        },
    ))
}

/// Error metrics over masked regions. Percentage metrics skip zero-truth
/// regions; `excluded_zero_truth` counts them. Percentages are signed as
/// `(imputed - true) / true`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricBundle {
    pub mae: f64,
    pub rmse: f64,
    pub mpe: f64,
    pub mape: f64,
    pub n: usize,
    pub excluded_zero_truth: usize,
}

pub fn score(imputed: &RateField, truth: &RateField, mask: &CensorMask) -> Result<MetricBundle, BenchError> {
    if mask.masked.is_empty() {
        return Err(BenchError::EmptyMask);
    }
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut pct_sum = 0.0;
    let mut abs_pct_sum = 0.0;
    let mut pct_n = 0usize;
    for r in &mask.masked {
        let yhat = imputed
            .get(r)
            .flatten()
            .ok_or_else(|| BenchError::RegionMismatch(format!("imputed field lacks {r}")))?;
        let y = truth
            .get(r)
            .flatten()
            .ok_or_else(|| BenchError::RegionMismatch(format!("truth lacks {r}")))?;
        let e = yhat - y;
        abs_sum += e.abs();
        sq_sum += e * e;
        if y != 0.0 {
            pct_sum += e / y;
            abs_pct_sum += e.abs() / y;
            pct_n += 1;
        }
    }
    let n = mask.masked.len() as f64;
    let (mpe, mape) = if pct_n > 0 {
        (100.0 * pct_sum / pct_n as f64, 100.0 * abs_pct_sum / pct_n as f64)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(MetricBundle {
        mae: abs_sum / n,
        rmse: (sq_sum / n).sqrt(),
        mpe,
        mape,
        n: mask.masked.len(),
        excluded_zero_truth: mask.masked.len() - pct_n,
    })
}

/// One row of the method comparison: metrics averaged over seeds;
/// `excluded_zero_truth` is summed over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub year: i32,
    pub method: ImputeMethod,
    pub seed_count: usize,
    pub mae: f64,
    pub rmse: f64,
    pub mpe: f64,
    pub mape: f64,
    pub excluded_zero_truth: usize,
}

#[derive(Debug, Clone)]
pub struct CompareOptions {
    pub fraction: f64,
    pub seeds: Vec<u64>,
    pub methods: Vec<ImputeMethod>,
    pub idw: IdwOptions,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            fraction: 0.5,
            seeds: (0..20).collect(),
            methods: ImputeMethod::ALL.to_vec(),
            idw: IdwOptions::default(),
        }
    }
}

/// The censoring seed used for `(base seed, year)` in [`compare_methods`].
pub fn mask_seed(seed: u64, year: i32) -> u64 {
    derive_seed(seed, year as u64)
}

/// Censors each year once per seed and scores every method on that mask.
pub fn compare_methods(
    truth: &RatePanel,
    graph: &RegionGraph,
    options: &CompareOptions,
) -> Result<Vec<BenchRow>, BenchError> {
    if options.seeds.is_empty() {
        return Err(BenchError::NoSeeds);
    }
    let cells: Vec<(i32, u64)> = truth
        .years()
        .into_iter()
        .flat_map(|y| options.seeds.iter().map(move |&s| (y, s)))
        .collect();
    let scored = par::map(&cells, |&(year, seed)| -> Result<Vec<MetricBundle>, BenchError> {
        let field = truth.get(year).expect("year listed");
        let (censored, mask) = censor(field, options.fraction, mask_seed(seed, year))?;
        if mask.masked.is_empty() {
            return Err(BenchError::EmptyMask);
        }
        options
            .methods
            .iter()
            .map(|m| {
                let imputed = m.apply(&censored, graph, options.idw)?;
                score(&imputed, field, &mask)
            })
            .collect()
    });
    let mut acc: BTreeMap<(i32, usize), Vec<MetricBundle>> = BTreeMap::new();
    for (&(year, _), res) in cells.iter().zip(scored) {
        for (mi, b) in res?.into_iter().enumerate() {
            acc.entry((year, mi)).or_default().push(b);
        }
    }
    Ok(acc
        .into_iter()
        .map(|((year, mi), bundles)| {
            let k = bundles.len() as f64;
            let avg = |f: fn(&MetricBundle) -> f64| bundles.iter().map(f).sum::<f64>() / k;
            BenchRow {
                year,
                method: options.methods[mi],
                seed_count: bundles.len(),
                mae: avg(|b| b.mae),
                rmse: avg(|b| b.rmse),
                mpe: avg(|b| b.mpe),
                mape: avg(|b| b.mape),
                excluded_zero_truth: bundles.iter().map(|b| b.excluded_zero_truth).sum(),
            }
        })
        .collect())
}

pub fn write_bench_csv<W: Write>(rows: &[BenchRow], writer: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["year", "method", "seed_count", "mae", "rmse", "mpe", "mape", "excluded_zero_truth"])?;
    for r in rows {
        w.write_record([
            r.year.to_string(),
            r.method.name().to_string(),
            r.seed_count.to_string(),
            fmt_sig6(r.mae),
            fmt_sig6(r.rmse),
            fmt_sig6(r.mpe),
            fmt_sig6(r.mape),
            r.excluded_zero_truth.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Mask file: one `#` header comment with year, seed, fraction and generator,
/// then a `fips` column.
pub fn write_mask_csv<W: Write>(mask: &CensorMask, mut writer: W) -> Result<(), BenchError> {
    writeln!(
        writer,
        "# year={},seed={},fraction={},generator=splitmix64",
        mask.year,
        mask.seed,
        crate::io::fmt_full(mask.fraction)
    )?;
    writeln!(writer, "fips")?;
    for r in &mask.masked {
        writeln!(writer, "{r}")?;
    }
    Ok(())
}

pub fn read_mask_csv<R: BufRead>(reader: R) -> Result<CensorMask, BenchError> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| BenchError::MalformedMask("empty file".into()))??;
    let meta = header
        .strip_prefix('#')
        .ok_or_else(|| BenchError::MalformedMask("missing header comment".into()))?;
    let mut year = None;
    let mut seed = None;
    let mut fraction = None;
    for kv in meta.trim().split(',') {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| BenchError::MalformedMask(format!("bad header item {kv:?}")))?;
        let bad = || BenchError::MalformedMask(format!("bad value for {k}: {v:?}"));
        match k.trim() {
            "year" => year = Some(v.trim().parse::<i32>().map_err(|_| bad())?),
            "seed" => seed = Some(v.trim().parse::<u64>().map_err(|_| bad())?),
            "fraction" => fraction = Some(v.trim().parse::<f64>().map_err(|_| bad())?),
            _ => {}
        }
    }
    match lines.next() {
        Some(Ok(l)) if l.trim() == "fips" => {}
        _ => return Err(BenchError::MalformedMask("expected `fips` column header".into())),
    }
    let mut masked = BTreeSet::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        masked.insert(
            line.parse::<RegionId>()
                .map_err(|e| BenchError::MalformedMask(e.to_string()))?,
        );
    }
    Ok(CensorMask {
        year: year.ok_or_else(|| BenchError::MalformedMask("no year".into()))?,
        seed: seed.ok_or_else(|| BenchError::MalformedMask("no seed".into()))?,
        fraction: fraction.ok_or_else(|| BenchError::MalformedMask("no fraction".into()))?,
        masked,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EfficacyReport {
    pub year: i32,
    pub errors: BTreeMap<RegionId, f64>,
    pub accuracy: BTreeMap<RegionId, f64>,
    pub avg_error: f64,
    pub max_error: f64,
    pub avg_accuracy: f64,
}

/// Absolute residuals, and accuracy as `100 * (1 - error / max error)`.
pub fn efficacy_report(predictions: &RateField, truth: &RateField) -> Result<EfficacyReport, BenchError> {
    if !predictions.same_regions(truth) {
        return Err(BenchError::RegionMismatch(format!(
            "predictions ({}) and truth ({}) cover different regions",
            predictions.len(),
            truth.len()
        )));
    }
    if predictions.is_empty() {
        return Err(BenchError::EmptyField);
    }
    if !predictions.is_complete() {
        return Err(BenchError::IncompleteInput(predictions.year));
    }
    if !truth.is_complete() {
        return Err(BenchError::IncompleteInput(truth.year));
    }
    let errors: BTreeMap<RegionId, f64> = predictions
        .iter()
        .zip(truth.iter())
        .map(|((r, p), (_, t))| (*r, (p.unwrap() - t.unwrap()).abs()))
        .collect();
    let max_error = errors.values().copied().fold(0.0, f64::max);
    let accuracy: BTreeMap<RegionId, f64> = errors
        .iter()
        .map(|(r, &e)| {
            let a = if max_error > 0.0 { 100.0 * (1.0 - e / max_error) } else { 100.0 };
            (*r, a)
        })
        .collect();
    let n = errors.len() as f64;
    Ok(EfficacyReport {
        year: truth.year,
        avg_error: errors.values().sum::<f64>() / n,
        max_error,
        avg_accuracy: accuracy.values().sum::<f64>() / n,
        errors,
        accuracy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryStats {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Linear interpolation between order statistics at `h = (n - 1) p`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summary_stats(field: &RateField) -> Result<SummaryStats, BenchError> {
    if field.is_empty() {
        return Err(BenchError::EmptyField);
    }
    let mut v = field
        .complete_values()
        .ok_or(BenchError::IncompleteInput(field.year))?;
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let mean = v.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(SummaryStats {
        n,
        mean,
        std,
        min: v[0],
        q1: quantile_sorted(&v, 0.25),
        median: quantile_sorted(&v, 0.5),
        q3: quantile_sorted(&v, 0.75),
        max: v[n - 1],
    })
}
