//! Chronological training with a triangular cyclical learning rate and
//! early stopping on a held-out year pair.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::net::{backward, forward, l1_loss, Activation, Dims, NetParams, Tensors};
use super::AutoencError;
use crate::io::fmt_sig6;
use crate::linalg::Matrix;

/// Inputs of year `t` (scaled to `[0, 1]`) paired with rates of `t + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub input_year: i32,
    pub x: Matrix,
    pub y: Vec<f64>,
}

impl TrainingPair {
    pub fn target_year(&self) -> i32 {
        self.input_year + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub d1: usize,
    pub d2: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub lr_base: f64,
    pub lr_peak: f64,
    pub cycle_epochs: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
    /// Target year of the held-out pair.
    pub validation_year: i32,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            d1: 1024,
            d2: 128,
            max_epochs: 100,
            patience: 10,
            lr_base: 1e-4,
            lr_peak: 1e-2,
            cycle_epochs: 10.0,
            optimizer: Optimizer::Adam,
            seed: 0,
            validation_year: 2015,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), AutoencError> {
        let bad = |m: String| Err(AutoencError::InvalidConfig(m));
        if self.max_epochs == 0 || self.patience >= self.max_epochs {
            return bad(format!(
                "need 0 < patience < max_epochs, got patience {} and max_epochs {}",
                self.patience, self.max_epochs
            ));
        }
        if !(self.lr_base > 0.0 && self.lr_base <= self.lr_peak && self.lr_peak.is_finite()) {
            return bad(format!("need 0 < lr_base <= lr_peak, got {} and {}", self.lr_base, self.lr_peak));
        }
        if !(self.cycle_epochs > 0.0) {
            return bad("cycle length must be positive".into());
        }
        Ok(())
    }

    /// Triangular wave from `lr_base` up to `lr_peak` and back over one cycle,
    /// evaluated at a fractional epoch (0 at the start of training).
    pub fn learning_rate(&self, epoch: f64) -> f64 {
        let phase = (epoch / self.cycle_epochs).fract();
        let tri = 1.0 - (2.0 * phase - 1.0).abs();
        self.lr_base + (self.lr_peak - self.lr_base) * tri
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub epoch: usize,
    /// Mean of the per-step training losses within the epoch.
    pub train_l1: f64,
    pub val_l1: f64,
    /// Learning rate of the epoch's first step.
    pub lr: f64,
    pub best_so_far: f64,
}

pub fn write_log_csv<W: Write>(log: &[LogRow], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["epoch", "train_l1", "val_l1", "lr", "best_so_far"])?;
    for r in log {
        w.write_record([
            r.epoch.to_string(),
            fmt_sig6(r.train_l1),
            fmt_sig6(r.val_l1),
            fmt_sig6(r.lr),
            fmt_sig6(r.best_so_far),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Parameters of the best validation epoch.
    pub params: NetParams,
    pub log: Vec<LogRow>,
    pub best_epoch: usize,
    pub best_val_l1: f64,
}

struct Adam {
    m: Tensors,
    v: Tensors,
    t: i32,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPSILON: f64 = 1e-8;

fn apply_step(params: &mut NetParams, grads: &Tensors, lr: f64, adam: Option<&mut Adam>) {
    let w = params.weights_mut();
    match adam {
        None => {
            for (p, g) in w.parts_mut().into_iter().zip(grads.parts()) {
                for (pi, gi) in p.iter_mut().zip(g) {
                    *pi -= lr * gi;
                }
            }
        }
        Some(a) => {
            a.t += 1;
            let c1 = 1.0 - BETA1.powi(a.t);
            let c2 = 1.0 - BETA2.powi(a.t);
            for (((p, g), m), v) in w
                .parts_mut()
                .into_iter()
                .zip(grads.parts())
                .zip(a.m.parts_mut())
                .zip(a.v.parts_mut())
            {
                for i in 0..p.len() {
                    m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
                    v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
                    p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + EPSILON);
                }
            }
        }
    }
}

/// Splits pairs into training (chronological) and the validation pair, then
/// trains from a seeded initialisation.
pub fn train(pairs: &[TrainingPair], config: &TrainConfig) -> Result<TrainOutcome, AutoencError> {
    config.validate()?;
    let val = pairs
        .iter()
        .find(|p| p.target_year() == config.validation_year)
        .ok_or(AutoencError::MissingValidationPair(config.validation_year))?;
    let mut train: Vec<&TrainingPair> = pairs
        .iter()
        .filter(|p| p.target_year() != config.validation_year)
        .collect();
    train.sort_by_key(|p| p.input_year);
    let n = val.y.len();
    let dims = Dims { n, d1: config.d1, d2: config.d2 };
    let init = NetParams::init(dims, Activation::Relu, config.seed)?;
    train_from(init, &train, val, config)
}

/// Trains `params` on `train` in the given order, one step per pair per epoch.
pub fn train_from(
    mut params: NetParams,
    train: &[&TrainingPair],
    val: &TrainingPair,
    config: &TrainConfig,
) -> Result<TrainOutcome, AutoencError> {
    config.validate()?;
    if train.is_empty() {
        return Err(AutoencError::EmptyTrainingSet);
    }
    let mut adam = match config.optimizer {
        Optimizer::Adam => Some(Adam {
            m: Tensors::zeros(params.dims),
            v: Tensors::zeros(params.dims),
            t: 0,
        }),
        Optimizer::Sgd => None,
    };
    let steps = train.len() as f64;
    let mut best: Option<(NetParams, f64, usize)> = None;
    let mut since_best = 0;
    let mut log = Vec::new();
    for epoch in 1..=config.max_epochs {
        let mut loss_sum = 0.0;
        let first_lr = config.learning_rate((epoch - 1) as f64);
        for (s, pair) in train.iter().enumerate() {
            let lr = config.learning_rate((epoch - 1) as f64 + s as f64 / steps);
            let (out, cache) = forward(&params, &pair.x)?;
            loss_sum += l1_loss(&out, &pair.y)?;
            let grads = backward(&params, &cache, &pair.y)?;
            apply_step(&mut params, &grads, lr, adam.as_mut());
        }
        if !params.weights().all_finite() {
            return Err(AutoencError::NonFinite(epoch));
        }
        let (val_out, _) = forward(&params, &val.x)?;
        let val_l1 = l1_loss(&val_out, &val.y)?;
        let improved = best.as_ref().is_none_or(|b| val_l1 < b.1);
        if improved {
            best = Some((params.clone(), val_l1, epoch));
            since_best = 0;
        } else {
            since_best += 1;
        }
        let best_val = best.as_ref().expect("set on first epoch").1;
        log.push(LogRow {
            epoch,
            train_l1: loss_sum / steps,
            val_l1,
            lr: first_lr,
            best_so_far: best_val,
        });
        if since_best >= config.patience {
            log::info!("early stop at epoch {epoch}; best epoch {}", best.as_ref().unwrap().2);
            break;
        }
    }
    let (params, best_val_l1, best_epoch) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        params,
        log,
        best_epoch,
        best_val_l1,
    })
}
