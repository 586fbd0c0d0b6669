#![allow(dead_code)]

use ocon_core::metrics::ConfusionCounts;
use ocon_core::neural::{MlpConfig, OneClassNet};
use ocon_core::seed;
use rand::Rng;

pub const FD_STEP: f64 = 1e-5;

/// Largest relative error between analytic and central-difference
/// gradients for one random net, batch, target vector and dropout draw.
/// Entries whose +-h perturbation flips the sign of some pre-activation
/// (a ReLU kink) are skipped. Returns `(max_rel_err, checked, skipped)`.
pub fn gradient_check(input_dim: usize, trial: u64) -> (f64, usize, usize) {
    let mut rng = seed::rng(1000 + trial);
    let mut net = OneClassNet::new(MlpConfig {
        input_dim,
        seed: trial,
        l2_lambda: 1e-3,
        ..MlpConfig::default()
    })
    .unwrap();
    // move batch-norm scale and shift off their initial values
    for (name, p) in net.parameter_names().into_iter().zip(net.parameters_mut()) {
        if name.contains("bn_") {
            for v in p.iter_mut() {
                *v += rng.random_range(-0.5..0.5);
            }
        }
    }
    let n = 8;
    let batch: Vec<f64> = (0..n * input_dim).map(|_| rng.random::<f64>()).collect();
    let targets: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
    let masks = net.sample_masks(n);

    let (logits, cache) = net.forward_train_masked(&batch, &masks).unwrap();
    let grads = net.backward(&cache, &logits, &targets).unwrap();
    let depth = net.config().hidden_layers.len();
    let signs = |c: &ocon_core::neural::ForwardCache| -> Vec<bool> {
        (0..depth)
            .flat_map(|l| c.pre_activation(l).iter().map(|&u| u > 0.0).collect::<Vec<_>>())
            .collect()
    };
    let base_signs = signs(&cache);

    let mut worst: f64 = 0.0;
    let (mut checked, mut skipped) = (0, 0);
    let n_tensors = grads.tensors.len();
    for t in 0..n_tensors {
        for i in 0..grads.tensors[t].len() {
            let orig = net.parameters()[t][i];
            let eval = |v: f64, net: &mut OneClassNet| {
                net.parameters_mut()[t][i] = v;
                let (lg, c) = net.forward_train_masked(&batch, &masks).unwrap();
                (net.objective(&lg, &targets), signs(&c))
            };
            let (fp, sp) = eval(orig + FD_STEP, &mut net);
            let (fm, sm) = eval(orig - FD_STEP, &mut net);
            net.parameters_mut()[t][i] = orig;
            if sp != base_signs || sm != base_signs {
                skipped += 1;
                continue;
            }
            let numeric = (fp - fm) / (2.0 * FD_STEP);
            let analytic = grads.tensors[t][i];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
            checked += 1;
        }
    }
    (worst, checked, skipped)
}

/// Counts by direct enumeration of the four cases.
pub fn brute_confusion(p: &[f64], y: &[bool], threshold: f64) -> ConfusionCounts {
    let count = |pred: bool, truth: bool| p.iter().zip(y).filter(|(&pi, &yi)| (pi >= threshold) == pred && yi == truth).count();
    ConfusionCounts::new(count(true, true), count(true, false), count(false, true), count(false, false))
}

/// `P(p_pos > p_neg) + 0.5 P(p_pos == p_neg)` over all pairs.
pub fn pair_auc(p: &[f64], y: &[bool]) -> f64 {
    let pos: Vec<f64> = p.iter().zip(y).filter(|(_, &l)| l).map(|(&v, _)| v).collect();
    let neg: Vec<f64> = p.iter().zip(y).filter(|(_, &l)| !l).map(|(&v, _)| v).collect();
    let mut s = 0.0;
    for &a in &pos {
        for &b in &neg {
            s += if a > b { 1.0 } else if a == b { 0.5 } else { 0.0 };
        }
    }
    s / (pos.len() * neg.len()) as f64
}

/// Random scores (coarsely quantised so ties occur) and labels with both
/// classes present.
pub fn fuzz_scores(trial: u64, n: usize) -> (Vec<f64>, Vec<bool>) {
    let mut rng = seed::rng(trial);
    loop {
        let p: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() * 20.0).floor() / 20.0).collect();
        let y: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
        if y.iter().any(|&b| b) && y.iter().any(|&b| !b) {
            return (p, y);
        }
    }
}
