//! The five-layer network `D4 . D3 . E2 . E1 . C` with hand-written
//! reverse-mode gradients.
//!
//! `C` maps each region's 13 covariates to one scalar with shared weights
//! (`c_i = w_C . x_i + b_C`). `E1` and `D3` are affine + ReLU, `E2` and `D4`
//! affine only, and `D4` returns one prediction per region.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::AutoencError;
use crate::linalg::Matrix;
use crate::rng::SplitMix64;
use crate::temporal::FEATURE_COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n: usize,
    pub d1: usize,
    pub d2: usize,
}

impl Dims {
    pub fn validate(&self) -> Result<(), AutoencError> {
        if self.d2 == 0 || self.d2 > self.d1 || self.d1 > self.n {
            return Err(AutoencError::InvalidDims(*self));
        }
        Ok(())
    }
}

/// Hidden-layer nonlinearity. `Identity` turns the network linear, which
/// gives closed-form attributions for testing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    /// Derivative, with the ReLU subgradient at 0 taken as 0.
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Every trainable tensor. Also used for gradients and optimiser moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensors {
    pub w_c: Vec<f64>,
    pub b_c: f64,
    pub w_e1: Matrix,
    pub b_e1: Vec<f64>,
    pub w_e2: Matrix,
    pub b_e2: Vec<f64>,
    pub w_d3: Matrix,
    pub b_d3: Vec<f64>,
    pub w_d4: Matrix,
    pub b_d4: Vec<f64>,
}

impl Tensors {
    pub const NAMES: [&'static str; 10] =
        ["w_c", "b_c", "w_e1", "b_e1", "w_e2", "b_e2", "w_d3", "b_d3", "w_d4", "b_d4"];

    pub fn zeros(d: Dims) -> Self {
        Tensors {
            w_c: vec![0.0; FEATURE_COUNT],
            b_c: 0.0,
            w_e1: Matrix::zeros(d.d1, d.n),
            b_e1: vec![0.0; d.d1],
            w_e2: Matrix::zeros(d.d2, d.d1),
            b_e2: vec![0.0; d.d2],
            w_d3: Matrix::zeros(d.d1, d.d2),
            b_d3: vec![0.0; d.d1],
            w_d4: Matrix::zeros(d.n, d.d1),
            b_d4: vec![0.0; d.n],
        }
    }

    pub fn parts(&self) -> [&[f64]; 10] {
        [
            &self.w_c,
            std::slice::from_ref(&self.b_c),
            self.w_e1.as_slice(),
            &self.b_e1,
            self.w_e2.as_slice(),
            &self.b_e2,
            self.w_d3.as_slice(),
            &self.b_d3,
            self.w_d4.as_slice(),
            &self.b_d4,
        ]
    }

    pub fn parts_mut(&mut self) -> [&mut [f64]; 10] {
        [
            &mut self.w_c,
            std::slice::from_mut(&mut self.b_c),
            self.w_e1.as_mut_slice(),
            &mut self.b_e1,
            self.w_e2.as_mut_slice(),
            &mut self.b_e2,
            self.w_d3.as_mut_slice(),
            &mut self.b_d3,
            self.w_d4.as_mut_slice(),
            &mut self.b_d4,
        ]
    }

    pub fn all_finite(&self) -> bool {
        self.parts().iter().all(|p| p.iter().all(|v| v.is_finite()))
    }
}

static GENERATION: AtomicU64 = AtomicU64::new(1);

fn next_generation() -> u64 {
    GENERATION.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetParams {
    pub dims: Dims,
    pub activation: Activation,
    weights: Tensors,
    #[serde(skip, default = "next_generation")]
    generation: u64,
}

impl NetParams {
    pub fn zeros(dims: Dims, activation: Activation) -> Result<Self, AutoencError> {
        dims.validate()?;
        Ok(NetParams {
            dims,
            activation,
            weights: Tensors::zeros(dims),
            generation: next_generation(),
        })
    }

    /// Weights uniform on `±1/sqrt(fan_in)`, biases zero.
    pub fn init(dims: Dims, activation: Activation, seed: u64) -> Result<Self, AutoencError> {
        let mut p = NetParams::zeros(dims, activation)?;
        let mut rng = SplitMix64::new(seed);
        let t = p.weights_mut();
        let mut fill = |w: &mut [f64], fan_in: usize| {
            let a = 1.0 / (fan_in as f64).sqrt();
            for v in w {
                *v = a * (2.0 * rng.next_f64() - 1.0);
            }
        };
        fill(&mut t.w_c, FEATURE_COUNT);
        fill(t.w_e1.as_mut_slice(), dims.n);
        fill(t.w_e2.as_mut_slice(), dims.d1);
        fill(t.w_d3.as_mut_slice(), dims.d2);
        fill(t.w_d4.as_mut_slice(), dims.d1);
        Ok(p)
    }

    pub fn from_tensors(dims: Dims, activation: Activation, weights: Tensors) -> Result<Self, AutoencError> {
        dims.validate()?;
        let want = Tensors::zeros(dims);
        let shapes_match = want
            .parts()
            .iter()
            .zip(weights.parts().iter())
            .all(|(a, b)| a.len() == b.len())
            && weights.w_e1.shape() == want.w_e1.shape()
            && weights.w_e2.shape() == want.w_e2.shape()
            && weights.w_d3.shape() == want.w_d3.shape()
            && weights.w_d4.shape() == want.w_d4.shape();
        if !shapes_match {
            return Err(AutoencError::InvalidDims(dims));
        }
        Ok(NetParams {
            dims,
            activation,
            weights,
            generation: next_generation(),
        })
    }

    pub fn weights(&self) -> &Tensors {
        &self.weights
    }

    /// Mutable access; invalidates every cache taken from earlier forwards.
    pub fn weights_mut(&mut self) -> &mut Tensors {
        self.generation = next_generation();
        &mut self.weights
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }
}

impl PartialEq for NetParams {
    fn eq(&self, other: &Self) -> bool {
        self.dims == other.dims && self.activation == other.activation && self.weights == other.weights
    }
}

/// Activations retained by [`forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct Cache {
    generation: u64,
    x: Matrix,
    c: Vec<f64>,
    z1: Vec<f64>,
    h1: Vec<f64>,
    h2: Vec<f64>,
    z3: Vec<f64>,
    h3: Vec<f64>,
    pub output: Vec<f64>,
}

impl Cache {
    /// Pre-activations of the two ReLU layers, `E1` then `D3`.
    pub fn hidden_pre_activations(&self) -> [&[f64]; 2] {
        [&self.z1, &self.z3]
    }
}

fn affine(w: &Matrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    let mut z = w.matvec(x);
    for (zi, bi) in z.iter_mut().zip(b) {
        *zi += bi;
    }
    z
}

/// Runs the network on an `n x 13` matrix of inputs already scaled to `[0, 1]`.
pub fn forward(params: &NetParams, x: &Matrix) -> Result<(Vec<f64>, Cache), AutoencError> {
    let d = params.dims;
    if x.shape() != (d.n, FEATURE_COUNT) {
        return Err(AutoencError::DimensionMismatch(format!(
            "input is {:?}, network expects ({}, {FEATURE_COUNT})",
            x.shape(),
            d.n
        )));
    }
    let t = &params.weights;
    let act = params.activation;
    let c: Vec<f64> = (0..d.n)
        .map(|i| crate::linalg::dot(&t.w_c, x.row(i)) + t.b_c)
        .collect();
    let z1 = affine(&t.w_e1, &c, &t.b_e1);
    let h1: Vec<f64> = z1.iter().map(|&z| act.apply(z)).collect();
    let h2 = affine(&t.w_e2, &h1, &t.b_e2);
    let z3 = affine(&t.w_d3, &h2, &t.b_d3);
    let h3: Vec<f64> = z3.iter().map(|&z| act.apply(z)).collect();
    let output = affine(&t.w_d4, &h3, &t.b_d4);
    let cache = Cache {
        generation: params.generation,
        x: x.clone(),
        c,
        z1,
        h1,
        h2,
        z3,
        h3,
        output: output.clone(),
    };
    Ok((output, cache))
}

pub fn l1_loss(predicted: &[f64], target: &[f64]) -> Result<f64, AutoencError> {
    if predicted.len() != target.len() {
        return Err(AutoencError::DimensionMismatch(format!(
            "{} predictions for {} targets",
            predicted.len(),
            target.len()
        )));
    }
    if predicted.is_empty() {
        return Ok(0.0);
    }
    Ok(predicted.iter().zip(target).map(|(p, y)| (p - y).abs()).sum::<f64>() / predicted.len() as f64)
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Propagates `d_out = dF/d output` back through the network. Returns the
/// parameter gradients (when requested) and `dF/dc`.
fn backprop(params: &NetParams, cache: &Cache, d_out: &[f64], want_params: bool) -> (Option<Tensors>, Vec<f64>) {
    let t = &params.weights;
    let act = params.activation;
    let mut g = want_params.then(|| Tensors::zeros(params.dims));

    let mut dz3 = t.w_d4.matvec_t(d_out);
    for (d, &z) in dz3.iter_mut().zip(&cache.z3) {
        *d *= act.derivative(z);
    }
    let dh2 = t.w_d3.matvec_t(&dz3);
    let mut dz1 = t.w_e2.matvec_t(&dh2);
    for (d, &z) in dz1.iter_mut().zip(&cache.z1) {
        *d *= act.derivative(z);
    }
    let dc = t.w_e1.matvec_t(&dz1);

    if let Some(g) = g.as_mut() {
        g.w_d4.add_outer(1.0, d_out, &cache.h3);
        g.b_d4.copy_from_slice(d_out);
        g.w_d3.add_outer(1.0, &dz3, &cache.h2);
        g.b_d3.copy_from_slice(&dz3);
        g.w_e2.add_outer(1.0, &dh2, &cache.h1);
        g.b_e2.copy_from_slice(&dh2);
        g.w_e1.add_outer(1.0, &dz1, &cache.c);
        g.b_e1.copy_from_slice(&dz1);
        g.w_c = cache.x.matvec_t(&dc);
        g.b_c = dc.iter().sum();
    }
    (g, dc)
}

fn check_cache(params: &NetParams, cache: &Cache) -> Result<(), AutoencError> {
    if cache.generation != params.generation {
        return Err(AutoencError::StaleCache);
    }
    Ok(())
}

/// Gradients of the mean-L1 loss, with `sign(0) = 0`.
pub fn backward(params: &NetParams, cache: &Cache, target: &[f64]) -> Result<Tensors, AutoencError> {
    check_cache(params, cache)?;
    if target.len() != params.dims.n {
        return Err(AutoencError::DimensionMismatch(format!(
            "{} targets for {} regions",
            target.len(),
            params.dims.n
        )));
    }
    let n = params.dims.n as f64;
    let d_out: Vec<f64> = cache.output.iter().zip(target).map(|(p, y)| sign(p - y) / n).collect();
    Ok(backprop(params, cache, &d_out, true).0.expect("requested"))
}

/// Gradient of the summed output `F = sum_i output_i` with respect to every
/// input cell, as an `n x 13` matrix.
pub fn input_gradient(params: &NetParams, cache: &Cache) -> Result<Matrix, AutoencError> {
    check_cache(params, cache)?;
    let ones = vec![1.0; params.dims.n];
    let (_, dc) = backprop(params, cache, &ones, false);
    let w_c = &params.weights.w_c;
    let mut g = Matrix::zeros(params.dims.n, FEATURE_COUNT);
    for (i, &d) in dc.iter().enumerate() {
        for (gij, &w) in g.row_mut(i).iter_mut().zip(w_c) {
            *gij = d * w;
        }
    }
    Ok(g)
}

/// Percentile covariates (0-100) rescaled to `[0, 1]`.
pub fn rescale_features(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    out.map_inplace(|v| v / 100.0);
    out
}
