//! Special functions: gamma-family functions come from `statrs`, the error
//! function from `libm`; trigamma and the normal tail helpers live here.

use std::f64::consts::{PI, SQRT_2};

pub use statrs::function::gamma::{digamma, gamma_lr, ln_gamma};

/// Trigamma function `psi'(x)` for `x > 0`.
pub fn trigamma(mut x: f64) -> f64 {
    if x <= 0.0 || x.is_nan() {
        return f64::NAN;
    }
    let mut acc = 0.0;
    // recurrence psi'(x) = psi'(x + 1) + 1/x^2 until the asymptotic series converges
    while x < 8.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let z = 1.0 / (x * x);
    // Bernoulli-number series
    let tail = z
        * (1.0 / 6.0
            - z * (1.0 / 30.0
                - z * (1.0 / 42.0 - z * (1.0 / 30.0 - z * (5.0 / 66.0 - z * (691.0 / 2730.0 - z * 7.0 / 6.0))))));
    acc + 1.0 / x + z / 2.0 + tail / x
}

/// Standard normal CDF.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

/// Standard normal quantile: `statrs` starting point polished by Newton
/// steps against [`norm_cdf`].
pub fn norm_quantile(p: f64) -> f64 {
    let mut z = -SQRT_2 * statrs::function::erf::erfc_inv(2.0 * p);
    for _ in 0..3 {
        let pdf = (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
        if pdf == 0.0 {
            break;
        }
        // the upper tail is refined against the survival function to keep precision
        let step = if z > 0.0 {
            (0.5 * libm::erfc(z / SQRT_2) - (1.0 - p)) / -pdf
        } else {
            (norm_cdf(z) - p) / pdf
        };
        z -= step;
    }
    z
}

/// `ln Phi(-b)` for `b >= 0`, accurate far into the upper tail.
pub fn ln_norm_sf(b: f64) -> f64 {
    if b < 30.0 {
        return (0.5 * libm::erfc(b / SQRT_2)).ln();
    }
    // Mills-ratio asymptotic expansion
    let z = 1.0 / (b * b);
    let series = 1.0 - z * (1.0 - z * (3.0 - z * (15.0 - z * 105.0)));
    -0.5 * b * b - 0.5 * (2.0 * PI).ln() - b.ln() + series.ln()
}
