//! Expected-gradients attribution of the summed network output to each
//! region's input covariates.

use std::collections::BTreeMap;

use super::net::{forward, input_gradient, NetParams};
use super::AutoencError;
use crate::linalg::Matrix;
use crate::par;
use crate::ranking::FeatureScores;
use crate::rng::SplitMix64;
use crate::temporal::FEATURE_COUNT;

/// Samples per partial sum; partial sums are added in chunk order.
pub const EG_CHUNK: usize = 8;

/// Attribution matrix (`n x 13`): the mean over `n_samples` draws of
/// `(x - b) * dF/dx` at `b + alpha (x - b)`, where `F` is the sum of all
/// outputs. Draw `s` uses baseline `s mod |baselines|` and the `s`-th uniform
/// from `SplitMix64::new(seed)` as `alpha`.
pub fn expected_gradients(
    params: &NetParams,
    x: &Matrix,
    baselines: &[Matrix],
    n_samples: usize,
    seed: u64,
) -> Result<Matrix, AutoencError> {
    if baselines.is_empty() {
        return Err(AutoencError::EmptyBaseline);
    }
    if n_samples == 0 {
        return Err(AutoencError::NoSamples);
    }
    if let Some(b) = baselines.iter().find(|b| b.shape() != x.shape()) {
        return Err(AutoencError::DimensionMismatch(format!(
            "baseline {:?} vs input {:?}",
            b.shape(),
            x.shape()
        )));
    }
    let mut rng = SplitMix64::new(seed);
    let alphas: Vec<f64> = (0..n_samples).map(|_| rng.next_f64()).collect();
    let chunks = n_samples.div_ceil(EG_CHUNK);
    let partials = par::map_range(chunks, |c| -> Result<Matrix, AutoencError> {
        let mut acc = Matrix::zeros(x.rows(), x.cols());
        for s in c * EG_CHUNK..((c + 1) * EG_CHUNK).min(n_samples) {
            let b = &baselines[s % baselines.len()];
            let a = alphas[s];
            let point = Matrix::from_vec(
                x.rows(),
                x.cols(),
                b.as_slice().iter().zip(x.as_slice()).map(|(bv, xv)| bv + a * (xv - bv)).collect(),
            );
            let (_, cache) = forward(params, &point)?;
            let grad = input_gradient(params, &cache)?;
            for (((o, g), xv), bv) in acc
                .as_mut_slice()
                .iter_mut()
                .zip(grad.as_slice())
                .zip(x.as_slice())
                .zip(b.as_slice())
            {
                *o += (xv - bv) * g;
            }
        }
        Ok(acc)
    });
    let mut total = Matrix::zeros(x.rows(), x.cols());
    for p in partials {
        for (t, v) in total.as_mut_slice().iter_mut().zip(p?.as_slice()) {
            *t += v;
        }
    }
    let k = n_samples as f64;
    total.map_inplace(|v| v / k);
    Ok(total)
}

/// Mean absolute attribution per feature for each year, ranked descending by
/// the cross-year average.
pub fn attribution_scores(per_year: &BTreeMap<i32, Matrix>) -> FeatureScores {
    let yearly = per_year
        .iter()
        .map(|(&year, shap)| {
            let mut s = [0.0; FEATURE_COUNT];
            for i in 0..shap.rows() {
                for (acc, v) in s.iter_mut().zip(shap.row(i)) {
                    *acc += v.abs();
                }
            }
            let n = shap.rows().max(1) as f64;
            (year, s.map(|v| v / n))
        })
        .collect();
    FeatureScores::from_yearly(yearly, true)
}
