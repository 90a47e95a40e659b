mod common;

use common::{ae_loss as loss, kinks};
use mortmap::autoenc::*;
use mortmap::linalg::Matrix;
use mortmap::rng::SplitMix64;

const F: usize = 13;

fn inputs(n: usize, rng: &mut SplitMix64) -> Matrix {
    common::jittered_inputs(n, F, rng)
}

#[test]
fn backward_matches_central_differences() {
    let mut rng = SplitMix64::new(2024);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let (mut checked, mut skipped) = (0usize, 0usize);
    for config in 0..50 {
        let n = 4 + rng.next_below(37) as usize;
        let d1 = 2 + rng.next_below(15.min(n as u64 - 1)) as usize;
        let d2 = 1 + rng.next_below(4.min(d1 as u64)) as usize;
        let mut p = NetParams::init(Dims { n, d1, d2 }, Activation::Relu, config).unwrap();
        // nonzero biases so that dead units are rare
        for b in p.weights_mut().b_e1.iter_mut() {
            *b = 0.05 + 0.1 * rng.next_f64();
        }
        let x = inputs(n, &mut rng);
        let y: Vec<f64> = (0..n).map(|_| 2.0 * rng.next_f64() - 1.0).collect();
        let (_, cache) = forward(&p, &x).unwrap();
        let grads = backward(&p, &cache, &y).unwrap();
        let base = kinks(&p, &x, &y);
        for (t, g) in grads.parts().iter().enumerate() {
            for k in 0..g.len() {
                let mut plus = p.clone();
                plus.weights_mut().parts_mut()[t][k] += h;
                let mut minus = p.clone();
                minus.weights_mut().parts_mut()[t][k] -= h;
                if kinks(&plus, &x, &y) != base || kinks(&minus, &x, &y) != base {
                    skipped += 1;
                    continue;
                }
                let fd = (loss(&plus, &x, &y) - loss(&minus, &x, &y)) / (2.0 * h);
                let rel = (g[k] - fd).abs() / g[k].abs().max(fd.abs()).max(1e-6);
                assert!(rel < 1e-4, "config {config} tensor {} index {k}: {} vs {fd}", Tensors::NAMES[t], g[k]);
                worst = worst.max(rel);
                checked += 1;
            }
        }
    }
    assert!(skipped * 20 < checked, "too many kink crossings: {skipped} of {}", checked + skipped);
    println!("checked {checked} parameters, skipped {skipped}, worst relative error {worst:.2e}");
}

#[test]
fn linear_network_attributions_have_closed_form() {
    let mut rng = SplitMix64::new(77);
    let dims = Dims { n: 20, d1: 8, d2: 3 };
    let mut p = NetParams::init(dims, Activation::Identity, 5).unwrap();
    p.weights_mut().w_c[2] = 0.0;
    let x = inputs(dims.n, &mut rng);
    let baselines: Vec<Matrix> = (0..4).map(|_| inputs(dims.n, &mut rng)).collect();
    let shap = expected_gradients(&p, &x, &baselines, 40, 3).unwrap();

    // g = 1^T W_D4 W_D3 W_E2 W_E1
    let w = p.weights();
    let ones = vec![1.0; dims.n];
    let g = w.w_e1.matvec_t(&w.w_e2.matvec_t(&w.w_d3.matvec_t(&w.w_d4.matvec_t(&ones))));
    for i in 0..dims.n {
        for j in 0..F {
            let mean_b = baselines.iter().map(|b| b[(i, j)]).sum::<f64>() / baselines.len() as f64;
            let want = g[i] * w.w_c[j] * (x[(i, j)] - mean_b);
            assert!((shap[(i, j)] - want).abs() < 1e-10, "({i},{j}): {} vs {want}", shap[(i, j)]);
        }
    }
    assert!(shap.column(2).iter().all(|&v| v == 0.0));
}

#[test]
fn completeness_within_two_percent() {
    let mut rng = SplitMix64::new(31);
    let dims = Dims { n: 30, d1: 12, d2: 4 };
    let mut p = NetParams::init(dims, Activation::Relu, 8).unwrap();
    for b in p.weights_mut().b_e1.iter_mut() {
        *b = 0.2;
    }
    let x = inputs(dims.n, &mut rng);
    let baselines: Vec<Matrix> = (0..10).map(|_| inputs(dims.n, &mut rng)).collect();
    let shap = expected_gradients(&p, &x, &baselines, 200, 9).unwrap();
    let total = |m: &Matrix| forward(&p, m).unwrap().0.iter().sum::<f64>();
    let fx = total(&x);
    let fb = baselines.iter().map(total).sum::<f64>() / baselines.len() as f64;
    let attributed: f64 = shap.as_slice().iter().sum();
    let rel = (attributed - (fx - fb)).abs() / (fx.abs() + 1e-8);
    println!("completeness gap {rel:.3e}");
    assert!(rel < 0.02);
}

fn pair(year: i32, x: Matrix, y: Vec<f64>) -> TrainingPair {
    TrainingPair { input_year: year, x, y }
}

#[test]
fn early_stopping_counts_patience_from_best() {
    let mut rng = SplitMix64::new(5);
    let n = 16;
    let x = inputs(n, &mut rng);
    let y: Vec<f64> = (0..n).map(|i| 10.0 + i as f64).collect();
    let train_pair = pair(2010, x.clone(), y.clone());
    // validation targets move away as the fit to the training targets improves
    let val_pair = pair(2014, x, y.iter().map(|v| -v).collect());
    let cfg = TrainConfig { d1: 8, d2: 2, max_epochs: 60, patience: 10, ..TrainConfig::default() };
    let init = NetParams::init(Dims { n, d1: 8, d2: 2 }, Activation::Relu, 1).unwrap();
    let out = train_from(init.clone(), &[&train_pair], &val_pair, &cfg).unwrap();
    assert_eq!(out.best_epoch, 1);
    assert_eq!(out.log.len(), out.best_epoch + cfg.patience);
    let (pred, _) = forward(&out.params, &val_pair.x).unwrap();
    assert_eq!(l1_loss(&pred, &val_pair.y).unwrap(), out.best_val_l1);
    let min_logged = out.log.iter().map(|r| r.val_l1).fold(f64::INFINITY, f64::min);
    assert_eq!(min_logged, out.best_val_l1);

    let again = train_from(init, &[&train_pair], &val_pair, &cfg).unwrap();
    assert_eq!(again.log, out.log);
}

#[test]
fn one_small_step_reduces_training_loss() {
    let mut rng = SplitMix64::new(6);
    let n = 12;
    let x = inputs(n, &mut rng);
    let y: Vec<f64> = (0..n).map(|_| 5.0 + rng.next_f64()).collect();
    let p = NetParams::init(Dims { n, d1: 6, d2: 2 }, Activation::Relu, 2).unwrap();
    let before = loss(&p, &x, &y);
    let tp = pair(2010, x.clone(), y.clone());
    let cfg = TrainConfig {
        d1: 6,
        d2: 2,
        max_epochs: 2,
        patience: 1,
        lr_base: 1e-6,
        lr_peak: 1e-6,
        optimizer: Optimizer::Sgd,
        ..TrainConfig::default()
    };
    let out = train_from(p, &[&tp], &tp, &cfg).unwrap();
    assert!(loss(&out.params, &x, &y) < before);
}
