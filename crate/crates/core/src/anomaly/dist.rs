//! Positive-support families, maximum-likelihood fits and fit diagnostics.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::special::{digamma, gamma_lr, ln_gamma, ln_norm_sf, norm_cdf, norm_quantile, trigamma};
use super::AnomalyError;

pub const MIN_FIT_SAMPLES: usize = 8;
pub const FIT_TOLERANCE: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 200;

/// Candidate families, in tie-break preference order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Lognormal,
    Gamma,
    Weibull,
    InverseGaussian,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Lognormal, Family::Gamma, Family::Weibull, Family::InverseGaussian];

    pub fn name(&self) -> &'static str {
        match self {
            Family::Lognormal => "lognormal",
            Family::Gamma => "gamma",
            Family::Weibull => "weibull",
            Family::InverseGaussian => "inverse-gaussian",
        }
    }

    pub fn param_names(&self) -> [&'static str; 2] {
        match self {
            Family::Lognormal => ["mu", "sigma"],
            Family::Gamma | Family::Weibull => ["shape", "scale"],
            Family::InverseGaussian => ["mean", "shape"],
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s.trim())
            .ok_or_else(|| format!("unknown family {s:?}"))
    }
}

/// A parameterised member of one of the candidate families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Distribution {
    Lognormal { mu: f64, sigma: f64 },
    Gamma { shape: f64, scale: f64 },
    Weibull { shape: f64, scale: f64 },
    InverseGaussian { mean: f64, shape: f64 },
}

impl Distribution {
    pub fn family(&self) -> Family {
        match self {
            Distribution::Lognormal { .. } => Family::Lognormal,
            Distribution::Gamma { .. } => Family::Gamma,
            Distribution::Weibull { .. } => Family::Weibull,
            Distribution::InverseGaussian { .. } => Family::InverseGaussian,
        }
    }

    pub fn params(&self) -> [f64; 2] {
        match *self {
            Distribution::Lognormal { mu, sigma } => [mu, sigma],
            Distribution::Gamma { shape, scale } => [shape, scale],
            Distribution::Weibull { shape, scale } => [shape, scale],
            Distribution::InverseGaussian { mean, shape } => [mean, shape],
        }
    }

    pub fn with_params(family: Family, p: [f64; 2]) -> Self {
        match family {
            Family::Lognormal => Distribution::Lognormal { mu: p[0], sigma: p[1] },
            Family::Gamma => Distribution::Gamma { shape: p[0], scale: p[1] },
            Family::Weibull => Distribution::Weibull { shape: p[0], scale: p[1] },
            Family::InverseGaussian => Distribution::InverseGaussian { mean: p[0], shape: p[1] },
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        match *self {
            Distribution::Lognormal { mu, sigma } => {
                let z = (x.ln() - mu) / sigma;
                -0.5 * z * z - x.ln() - sigma.ln() - 0.5 * (2.0 * PI).ln()
            }
            Distribution::Gamma { shape, scale } => {
                (shape - 1.0) * x.ln() - x / scale - ln_gamma(shape) - shape * scale.ln()
            }
            Distribution::Weibull { shape, scale } => {
                let t = x / scale;
                shape.ln() - scale.ln() + (shape - 1.0) * t.ln() - t.powf(shape)
            }
            Distribution::InverseGaussian { mean, shape } => {
                0.5 * (shape / (2.0 * PI * x * x * x)).ln() - shape * (x - mean).powi(2) / (2.0 * mean * mean * x)
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x.is_infinite() {
            return 1.0;
        }
        match *self {
            Distribution::Lognormal { mu, sigma } => norm_cdf((x.ln() - mu) / sigma),
            Distribution::Gamma { shape, scale } => gamma_lr(shape, x / scale),
            Distribution::Weibull { shape, scale } => -(-(x / scale).powf(shape)).exp_m1(),
            Distribution::InverseGaussian { mean, shape } => {
                let r = (shape / x).sqrt();
                let a = r * (x / mean - 1.0);
                let b = r * (x / mean + 1.0);
                // exp(2 shape / mean) * Phi(-b) overflows if formed directly
                let second = (2.0 * shape / mean + ln_norm_sf(b)).exp();
                (norm_cdf(a) + second).min(1.0)
            }
        }
    }

    /// Inverse CDF for `0 < p < 1`.
    pub fn quantile(&self, p: f64) -> f64 {
        assert!(p > 0.0 && p < 1.0, "quantile probability must lie in (0, 1)");
        match *self {
            Distribution::Lognormal { mu, sigma } => (mu + sigma * norm_quantile(p)).exp(),
            Distribution::Weibull { shape, scale } => scale * (-(-p).ln_1p()).powf(1.0 / shape),
            Distribution::Gamma { shape, scale } => invert_cdf(self, p, shape * scale),
            Distribution::InverseGaussian { mean, .. } => invert_cdf(self, p, mean),
        }
    }

    pub fn log_likelihood(&self, samples: &[f64]) -> f64 {
        samples.iter().map(|&x| self.ln_pdf(x)).sum()
    }
}

/// Bisection on `ln x` between an expanding bracket, to relative 1e-14.
fn invert_cdf(dist: &Distribution, p: f64, start: f64) -> f64 {
    let mut lo = start.ln();
    let mut hi = lo;
    let mut step = 1.0;
    while dist.cdf(lo.exp()) > p {
        lo -= step;
        step *= 2.0;
    }
    step = 1.0;
    while dist.cdf(hi.exp()) < p {
        hi += step;
        step *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if dist.cdf(mid.exp()) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    (0.5 * (lo + hi)).exp()
}

/// A fitted family with its goodness-of-fit diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FittedDistribution {
    pub dist: Distribution,
    pub n: usize,
    pub log_likelihood: f64,
    pub ks_statistic: f64,
    pub aic: f64,
    pub bic: f64,
}

impl FittedDistribution {
    pub const FREE_PARAMS: usize = 2;

    pub fn family(&self) -> Family {
        self.dist.family()
    }

    fn from_dist(dist: Distribution, samples: &[f64]) -> Result<Self, AnomalyError> {
        let [a, b] = dist.params();
        if !(a.is_finite() && b.is_finite() && b > 0.0) || (dist.family() != Family::Lognormal && a <= 0.0) {
            return Err(AnomalyError::NoConvergence(dist.family()));
        }
        let n = samples.len();
        let ll = dist.log_likelihood(samples);
        let p = Self::FREE_PARAMS as f64;
        Ok(FittedDistribution {
            dist,
            n,
            log_likelihood: ll,
            ks_statistic: ks_statistic(samples, &dist),
            aic: 2.0 * p - 2.0 * ll,
            bic: p * (n as f64).ln() - 2.0 * ll,
        })
    }
}

/// Kolmogorov-Smirnov distance between the sample ECDF and `dist`.
pub fn ks_statistic(samples: &[f64], dist: &Distribution) -> f64 {
    assert!(!samples.is_empty(), "KS statistic needs at least one sample");
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = dist.cdf(x);
            let i = i as f64;
            ((i + 1.0) / n - f).max(f - i / n)
        })
        .fold(0.0, f64::max)
}

fn check_samples(samples: &[f64]) -> Result<(), AnomalyError> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(AnomalyError::InsufficientSamples {
            needed: MIN_FIT_SAMPLES,
            found: samples.len(),
        });
    }
    if let Some(&x) = samples.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
        return Err(AnomalyError::NonPositiveSample(x));
    }
    let first = samples[0];
    if samples.iter().all(|&x| x == first) {
        return Err(AnomalyError::DegenerateSample);
    }
    Ok(())
}

/// Maximum-likelihood fit of one family.
pub fn fit_mle(samples: &[f64], family: Family) -> Result<FittedDistribution, AnomalyError> {
    check_samples(samples)?;
    let dist = match family {
        Family::Lognormal => fit_lognormal(samples),
        Family::Gamma => fit_gamma(samples)?,
        Family::Weibull => fit_weibull(samples)?,
        Family::InverseGaussian => fit_inverse_gaussian(samples),
    };
    FittedDistribution::from_dist(dist, samples)
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

fn fit_lognormal(x: &[f64]) -> Distribution {
    let mu = mean(x.iter().map(|v| v.ln()));
    let var = mean(x.iter().map(|v| (v.ln() - mu).powi(2)));
    Distribution::Lognormal { mu, sigma: var.sqrt() }
}

/// Newton on `ln k - psi(k) = ln(mean) - mean(ln x)` from Minka's start.
fn fit_gamma(x: &[f64]) -> Result<Distribution, AnomalyError> {
    let m = mean(x.iter().copied());
    let s = m.ln() - mean(x.iter().map(|v| v.ln()));
    if !(s > 0.0) {
        return Err(AnomalyError::DegenerateSample);
    }
    let mut k = (3.0 - s + ((s - 3.0).powi(2) + 24.0 * s).sqrt()) / (12.0 * s);
    for _ in 0..MAX_ITERATIONS {
        let f = k.ln() - digamma(k) - s;
        let df = 1.0 / k - trigamma(k);
        let mut next = k - f / df;
        if !(next > 0.0) {
            next = k / 2.0;
        }
        let done = ((next - k) / k).abs() < FIT_TOLERANCE;
        k = next;
        if done {
            return Ok(Distribution::Gamma { shape: k, scale: m / k });
        }
    }
    Err(AnomalyError::NoConvergence(Family::Gamma))
}

/// Shape from the profile-likelihood equation
/// `sum(x^k ln x) / sum(x^k) - 1/k - mean(ln x) = 0`, solved on `x / max(x)`
/// (the equation is scale-free) by Newton steps kept inside a bisection bracket.
fn fit_weibull(x: &[f64]) -> Result<Distribution, AnomalyError> {
    let xmax = x.iter().copied().fold(0.0, f64::max);
    let logs: Vec<f64> = x.iter().map(|v| (v / xmax).ln()).collect();
    let mean_log = mean(logs.iter().copied());
    let eval = |k: f64| {
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for &l in &logs {
            let w = (k * l).exp();
            s0 += w;
            s1 += w * l;
            s2 += w * l * l;
        }
        let g = s1 / s0 - 1.0 / k - mean_log;
        let dg = (s2 * s0 - s1 * s1) / (s0 * s0) + 1.0 / (k * k);
        (g, dg)
    };
    let (mut lo, mut hi) = (1.0, 1.0);
    while eval(lo).0 > 0.0 {
        lo /= 2.0;
        if lo < 1e-12 {
            return Err(AnomalyError::NoConvergence(Family::Weibull));
        }
    }
    while eval(hi).0 < 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(AnomalyError::NoConvergence(Family::Weibull));
        }
    }
    let mut k = 0.5 * (lo + hi);
    for _ in 0..MAX_ITERATIONS {
        let (g, dg) = eval(k);
        if g < 0.0 {
            lo = k;
        } else {
            hi = k;
        }
        let mut next = k - g / dg;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let done = ((next - k) / k).abs() < FIT_TOLERANCE;
        k = next;
        if done {
            let scale = xmax * mean(logs.iter().map(|l| (k * l).exp())).powf(1.0 / k);
            return Ok(Distribution::Weibull { shape: k, scale });
        }
    }
    Err(AnomalyError::NoConvergence(Family::Weibull))
}

fn fit_inverse_gaussian(x: &[f64]) -> Distribution {
    let m = mean(x.iter().copied());
    let inv = mean(x.iter().map(|v| 1.0 / v - 1.0 / m));
    Distribution::InverseGaussian { mean: m, shape: 1.0 / inv }
}

/// One candidate's outcome in a [`Selection`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyDiagnostics {
    pub family: Family,
    pub fit: Option<FittedDistribution>,
    pub failure: Option<String>,
    pub aic_rank: Option<usize>,
    pub bic_rank: Option<usize>,
    pub ks_rank: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection {
    pub best: FittedDistribution,
    pub table: Vec<FamilyDiagnostics>,
}

fn ranks(fits: &[(Family, FittedDistribution)], key: fn(&FittedDistribution) -> f64) -> Vec<(Family, usize)> {
    let mut v: Vec<&(Family, FittedDistribution)> = fits.iter().collect();
    v.sort_by(|a, b| key(&a.1).total_cmp(&key(&b.1)).then(a.0.cmp(&b.0)));
    v.into_iter().enumerate().map(|(r, (f, _))| (*f, r + 1)).collect()
}

/// Fits all four families and picks the lowest AIC; equal AIC falls back to
/// family preference order. BIC and KS ranks are reported alongside.
pub fn select_best(samples: &[f64]) -> Result<Selection, AnomalyError> {
    let outcomes: Vec<(Family, Result<FittedDistribution, AnomalyError>)> =
        Family::ALL.iter().map(|&f| (f, fit_mle(samples, f))).collect();
    let fits: Vec<(Family, FittedDistribution)> = outcomes
        .iter()
        .filter_map(|(f, r)| r.as_ref().ok().map(|d| (*f, *d)))
        .collect();
    if fits.is_empty() {
        let reasons = outcomes
            .iter()
            .map(|(f, r)| format!("{f}: {}", r.as_ref().expect_err("all failed")))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(AnomalyError::AllFitsFailed(reasons));
    }
    let aic = ranks(&fits, |d| d.aic);
    let bic = ranks(&fits, |d| d.bic);
    let ks = ranks(&fits, |d| d.ks_statistic);
    let lookup = |r: &[(Family, usize)], f: Family| r.iter().find(|x| x.0 == f).map(|x| x.1);
    let best_family = aic[0].0;
    let table = outcomes
        .into_iter()
        .map(|(family, r)| {
            let failure = r.as_ref().err().map(|e| e.to_string());
            if let Some(msg) = &failure {
                log::warn!("{family} fit excluded: {msg}");
            }
            FamilyDiagnostics {
                family,
                fit: r.ok(),
                failure,
                aic_rank: lookup(&aic, family),
                bic_rank: lookup(&bic, family),
                ks_rank: lookup(&ks, family),
            }
        })
        .collect();
    let best = fits.iter().find(|f| f.0 == best_family).expect("ranked family").1;
    Ok(Selection { best, table })
}
