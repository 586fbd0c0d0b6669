//! Browser demo: step through the MaxNet head, sweep a ROC/DET curve, and
//! train a single one-class network on a 2-D toy problem.
//!
//! The plain functions return serde values and are what the native tests
//! exercise; the `#[wasm_bindgen]` wrappers at the bottom hand JSON strings
//! to the page.

use ocon_core::features::{FeatureMatrix, VariantKind};
use ocon_core::metrics::{confusion, det_curve, det_err_rates, prf1, roc_auc, ConfusionCounts};
use ocon_core::neural::{MlpConfig, OneClassNet, OptimizerKind};
use ocon_core::ocon::{argmax, maxnet_trace, one_hot_encode, EncodedSubset, MaxNetConfig};
use ocon_core::seed::{self, derive_seed};
use ocon_core::trainer::run_epoch;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxNetDemo {
    pub input: Vec<f64>,
    pub epsilon: f64,
    pub states: Vec<Vec<f64>>,
    pub winner: usize,
    pub argmax: usize,
    pub fell_back: bool,
}

/// Parses comma or space separated numbers.
pub fn parse_vector(text: &str) -> Result<Vec<f64>, String> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| format!("{s:?} is not a number")))
        .collect()
}

/// Runs MaxNet on `values`; a non-positive or non-finite `epsilon` means
/// the default `1/n`.
pub fn maxnet_demo(values: &[f64], epsilon: f64) -> Result<MaxNetDemo, String> {
    let cfg = MaxNetConfig {
        epsilon: (epsilon.is_finite() && epsilon > 0.0).then_some(epsilon),
        ..MaxNetConfig::default()
    };
    let trace = maxnet_trace(values, &cfg).map_err(|e| e.to_string())?;
    Ok(MaxNetDemo {
        input: values.to_vec(),
        epsilon: cfg.epsilon.unwrap_or(1.0 / values.len() as f64),
        states: trace.states,
        winner: trace.winner,
        argmax: argmax(values).map_err(|e| e.to_string())?,
        fell_back: trace.fell_back,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocDemo {
    pub auc: f64,
    /// `(fpr, tpr)` from the strictest threshold down.
    pub roc: Vec<(f64, f64)>,
    /// `(fpr, fnr)`.
    pub det: Vec<(f64, f64)>,
    pub threshold: f64,
    pub counts: ConfusionCounts,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub error_rate: f64,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Scores of `n` positives and `n` negatives whose logits are unit
/// Gaussians `separation` apart, evaluated at `threshold`.
pub fn roc_demo(separation: f64, n: usize, threshold: f64, seed: u64) -> Result<RocDemo, String> {
    if n == 0 {
        return Err("need at least one sample per class".into());
    }
    let mut rng = seed::rng(seed);
    let unit = Normal::new(0.0, 1.0).map_err(|e| e.to_string())?;
    let mut scores = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(2 * n);
    for i in 0..2 * n {
        let positive = i < n;
        let shift = if positive { separation / 2.0 } else { -separation / 2.0 };
        scores.push(sigmoid(shift + unit.sample(&mut rng)));
        labels.push(positive);
    }
    let (roc, auc) = roc_auc(&scores, &labels).map_err(|e| e.to_string())?;
    let det = det_curve(&scores, &labels).map_err(|e| e.to_string())?;
    let counts = confusion(&scores, &labels, threshold).map_err(|e| e.to_string())?;
    let m = prf1(&counts);
    Ok(RocDemo {
        auc,
        roc: roc.points.iter().map(|p| (p.fpr, p.tpr)).collect(),
        det: det.iter().map(|p| (p.fpr, p.fnr)).collect(),
        threshold,
        counts,
        accuracy: m.accuracy.value,
        precision: m.precision.value,
        recall: m.recall.value,
        f1: m.f1.value,
        error_rate: det_err_rates(&counts).er.value,
    })
}

/// Cluster centres of the three toy classes in the unit square.
pub const TOY_CENTRES: [[f64; 2]; 3] = [[0.3, 0.7], [0.7, 0.7], [0.5, 0.28]];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ToyStep {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

/// One binary network learning "class `true_class` vs the rest" on three
/// Gaussian blobs, trained an epoch at a time.
pub struct Toy {
    pub points: Vec<[f64; 2]>,
    pub labels: Vec<usize>,
    pub true_class: usize,
    subset: EncodedSubset,
    net: OneClassNet,
    rng: seed::Rng,
    epoch: usize,
    pub history: Vec<ToyStep>,
}

impl Toy {
    pub fn new(seed: u64, true_class: usize, per_class: usize, spread: f64) -> Result<Self, String> {
        if true_class >= TOY_CENTRES.len() {
            return Err(format!("class {true_class} does not exist"));
        }
        let noise = Normal::new(0.0, spread.max(1e-6)).map_err(|e| e.to_string())?;
        let mut rng = seed::derived_rng(seed, &[0]);
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for (c, centre) in TOY_CENTRES.iter().enumerate() {
            for _ in 0..per_class {
                points.push([centre[0] + noise.sample(&mut rng), centre[1] + noise.sample(&mut rng)]);
                labels.push(c);
            }
        }
        let n = points.len();
        let matrix = FeatureMatrix {
            rows: n,
            cols: 2,
            values: points.iter().flatten().copied().collect(),
            variant: VariantKind::Ss3,
            names: vec![String::new(); n],
            phonemes: labels.iter().map(|&c| ocon_core::dataset::PhonemeClass::ALL[c]).collect(),
            groups: vec![ocon_core::dataset::SpeakerGroup::Man; n],
            scaling: None,
        };
        let subset = one_hot_encode(&matrix, &labels, TOY_CENTRES.len(), true_class, derive_seed(seed, &[1]))
            .map_err(|e| e.to_string())?;
        let net = OneClassNet::new(MlpConfig {
            input_dim: 2,
            hidden_layers: vec![16],
            lr: 0.01,
            optimizer: OptimizerKind::Adam,
            keep_input: 1.0,
            keep_hidden: 1.0,
            batch_norm: true,
            l2_lambda: 1e-4,
            batch_size: 16,
            seed: derive_seed(seed, &[2]),
        })
        .map_err(|e| e.to_string())?;
        Ok(Toy {
            points,
            labels,
            true_class,
            subset,
            net,
            rng: seed::derived_rng(seed, &[3]),
            epoch: 0,
            history: Vec::new(),
        })
    }

    /// Trains `epochs` more epochs over the balanced subset.
    pub fn train(&mut self, epochs: usize) -> Result<ToyStep, String> {
        let all: Vec<usize> = (0..self.subset.len()).collect();
        let mut loss = f64::NAN;
        for _ in 0..epochs {
            let losses = run_epoch(&mut self.net, &self.subset, &all, &mut self.rng).map_err(|e| e.to_string())?;
            loss = losses.iter().sum::<f64>() / losses.len().max(1) as f64;
            self.epoch += 1;
        }
        let accuracy = self.accuracy()?;
        let step = ToyStep {
            epoch: self.epoch,
            loss,
            accuracy,
        };
        self.history.push(step);
        Ok(step)
    }

    /// Accuracy over every toy point, "true class" vs "rest".
    pub fn accuracy(&self) -> Result<f64, String> {
        let x: Vec<f64> = self.points.iter().flatten().copied().collect();
        let p = self.net.predict_proba(&x).map_err(|e| e.to_string())?;
        let hits = p
            .iter()
            .zip(&self.labels)
            .filter(|(&p, &l)| (p >= 0.5) == (l == self.true_class))
            .count();
        Ok(hits as f64 / self.points.len() as f64)
    }

    /// Probabilities on a `res` x `res` grid over the unit square, row 0 at
    /// the top (y = 1).
    pub fn grid(&self, res: usize) -> Result<Vec<f64>, String> {
        let step = 1.0 / (res.max(2) - 1) as f64;
        let mut x = Vec::with_capacity(res * res * 2);
        for r in 0..res {
            for c in 0..res {
                x.push(c as f64 * step);
                x.push(1.0 - r as f64 * step);
            }
        }
        self.net.predict_proba(&x).map_err(|e| e.to_string())
    }

    pub fn subset_size(&self) -> (usize, usize) {
        (self.subset.positives, self.subset.negatives())
    }
}

fn js_err(e: String) -> JsValue {
    JsValue::from_str(&e)
}

fn to_json(v: &impl Serialize) -> Result<String, JsValue> {
    serde_json::to_string(v).map_err(|e| js_err(e.to_string()))
}

/// MaxNet trace of a comma separated vector, as JSON.
#[wasm_bindgen(js_name = maxnet)]
pub fn maxnet_js(values: &str, epsilon: f64) -> Result<String, JsValue> {
    let v = parse_vector(values).map_err(js_err)?;
    to_json(&maxnet_demo(&v, epsilon).map_err(js_err)?)
}

/// ROC, DET and threshold metrics of a synthetic score set, as JSON.
#[wasm_bindgen(js_name = rocDemo)]
pub fn roc_demo_js(separation: f64, n: u32, threshold: f64, seed: u32) -> Result<String, JsValue> {
    to_json(&roc_demo(separation, n as usize, threshold, seed as u64).map_err(js_err)?)
}

#[wasm_bindgen]
pub struct ToyTrainer(Toy);

#[wasm_bindgen]
impl ToyTrainer {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, true_class: u32, per_class: u32, spread: f64) -> Result<ToyTrainer, JsValue> {
        Toy::new(seed as u64, true_class as usize, per_class as usize, spread)
            .map(ToyTrainer)
            .map_err(js_err)
    }

    /// Trains more epochs; returns `{epoch, loss, accuracy}` as JSON.
    pub fn train(&mut self, epochs: u32) -> Result<String, JsValue> {
        to_json(&self.0.train(epochs as usize).map_err(js_err)?)
    }

    pub fn grid(&self, res: u32) -> Result<Vec<f64>, JsValue> {
        self.0.grid(res as usize).map_err(js_err)
    }

    /// `[[x, y, class], ...]` as JSON.
    pub fn points(&self) -> Result<String, JsValue> {
        let p: Vec<(f64, f64, usize)> = self.0.points.iter().zip(&self.0.labels).map(|(p, &l)| (p[0], p[1], l)).collect();
        to_json(&p)
    }

    #[wasm_bindgen(js_name = subsetSize)]
    pub fn subset_size(&self) -> Vec<u32> {
        let (p, n) = self.0.subset_size();
        vec![p as u32, n as u32]
    }
}
