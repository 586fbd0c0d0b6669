//! The One-Class-One-Network ensemble: balanced per-class subset encoding,
//! the bank of binary classifiers, and the decision heads.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureMatrix, Task};
use crate::neural::{sigmoid, MlpConfig, NeuralError, OneClassNet};
use crate::seed;

#[derive(Debug, Error, PartialEq)]
pub enum OconError {
    #[error("false class {class} has {available} samples, {needed} needed")]
    FalseClassTooSmall {
        class: usize,
        needed: usize,
        available: usize,
    },
    #[error("true class {0} has no samples")]
    TrueClassAbsent(usize),
    #[error("class {class} out of range for {n_classes} classes")]
    ClassOutOfRange { class: usize, n_classes: usize },
    #[error("empty vector")]
    EmptyVector,
    #[error("maxnet epsilon must be in (0, 1) and max_iters >= 1")]
    InvalidMaxNet,
    #[error("row has {got} features, nets expect {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

/// Largest tolerated `|negatives - positives|` after encoding.
pub const MAX_IMBALANCE: usize = 2;

/// A balanced binary subset for one class: every true-class row (label 1)
/// plus a near-equal share of rows from each other class (label 0).
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSubset {
    pub true_class: usize,
    /// Source row indices, in shuffled order.
    pub rows: Vec<usize>,
    pub features: Vec<f64>,
    pub dim: usize,
    pub labels: Vec<f64>,
    pub positives: usize,
    /// `(class, rows drawn)` for every false class, ascending by class.
    pub false_counts: Vec<(usize, usize)>,
}

impl EncodedSubset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn negatives(&self) -> usize {
        self.len() - self.positives
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    /// Gathers rows `idx` (positions within this subset) into a flat batch
    /// and matching targets.
    pub fn gather(&self, idx: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let mut x = Vec::with_capacity(idx.len() * self.dim);
        let mut y = Vec::with_capacity(idx.len());
        for &i in idx {
            x.extend_from_slice(self.row(i));
            y.push(self.labels[i]);
        }
        (x, y)
    }
}

/// Per-false-class draw, `round(true_size / (n_classes - 1))`.
pub fn false_class_quota(true_size: usize, n_classes: usize) -> usize {
    (true_size as f64 / (n_classes - 1) as f64).round() as usize
}

/// Builds the balanced subset for `true_class`.
///
/// Each false class first gets [`false_class_quota`] rows. When that leaves
/// the negatives more than [`MAX_IMBALANCE`] away from the positives, the
/// fewest possible false classes (picked by `seed`) give or take one row.
/// Rows are drawn without replacement; the final order is shuffled.
pub fn one_hot_encode(
    matrix: &FeatureMatrix,
    labels: &[usize],
    n_classes: usize,
    true_class: usize,
    seed: u64,
) -> Result<EncodedSubset, OconError> {
    if true_class >= n_classes {
        return Err(OconError::ClassOutOfRange {
            class: true_class,
            n_classes,
        });
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        if l >= n_classes {
            return Err(OconError::ClassOutOfRange { class: l, n_classes });
        }
        by_class[l].push(i);
    }
    let positives = by_class[true_class].clone();
    if positives.is_empty() {
        return Err(OconError::TrueClassAbsent(true_class));
    }
    let false_classes: Vec<usize> = (0..n_classes).filter(|&c| c != true_class).collect();
    let base = false_class_quota(positives.len(), n_classes);
    let mut rng = seed::derived_rng(seed, &[seed::stream::ENCODE]);

    let mut quota = vec![base; n_classes];
    let mut order = false_classes.clone();
    order.shuffle(&mut rng);
    let mut negatives = base * false_classes.len();
    let target = positives.len();
    let mut cursor = 0;
    while negatives > target + MAX_IMBALANCE && cursor < order.len() {
        quota[order[cursor]] -= 1;
        negatives -= 1;
        cursor += 1;
    }
    while negatives + MAX_IMBALANCE < target && cursor < order.len() {
        let c = order[cursor];
        cursor += 1;
        if by_class[c].len() > quota[c] {
            quota[c] += 1;
            negatives += 1;
        }
    }
    for &c in &false_classes {
        if by_class[c].len() < quota[c] {
            return Err(OconError::FalseClassTooSmall {
                class: c,
                needed: quota[c],
                available: by_class[c].len(),
            });
        }
    }

    let mut rows: Vec<(usize, f64)> = positives.iter().map(|&r| (r, 1.0)).collect();
    let mut false_counts = Vec::with_capacity(false_classes.len());
    for &c in &false_classes {
        let mut pool = by_class[c].clone();
        pool.shuffle(&mut rng);
        rows.extend(pool[..quota[c]].iter().map(|&r| (r, 0.0)));
        false_counts.push((c, quota[c]));
    }
    rows.shuffle(&mut rng);

    let dim = matrix.cols;
    let mut features = Vec::with_capacity(rows.len() * dim);
    for &(r, _) in &rows {
        features.extend_from_slice(matrix.row(r));
    }
    Ok(EncodedSubset {
        true_class,
        labels: rows.iter().map(|&(_, y)| y).collect(),
        rows: rows.into_iter().map(|(r, _)| r).collect(),
        features,
        dim,
        positives: positives.len(),
        false_counts,
    })
}

/// Index of the maximum; the first one on ties.
pub fn argmax(values: &[f64]) -> Result<usize, OconError> {
    if values.is_empty() {
        return Err(OconError::EmptyVector);
    }
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxNetConfig {
    /// Lateral inhibition weight; `None` means `1 / n`.
    pub epsilon: Option<f64>,
    pub max_iters: usize,
}

impl Default for MaxNetConfig {
    fn default() -> Self {
        MaxNetConfig {
            epsilon: None,
            max_iters: 1000,
        }
    }
}

/// Iterates of a MaxNet run, for inspection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxNetTrace {
    pub states: Vec<Vec<f64>>,
    pub winner: usize,
    /// True when the decision came from the ArgMax fallback.
    pub fell_back: bool,
}

/// Winner-takes-all by lateral inhibition:
/// `y_k <- relu(y_k - eps * sum_{i != k} y_i)`, all units updated together,
/// until a single unit stays positive.
///
/// Negative inputs are shifted up by the minimum first. Ties that survive
/// inhibition, a collapse to all zeros, or hitting `max_iters` fall back to
/// [`argmax`] on the input.
pub fn maxnet_trace(values: &[f64], config: &MaxNetConfig) -> Result<MaxNetTrace, OconError> {
    if values.is_empty() {
        return Err(OconError::EmptyVector);
    }
    let n = values.len();
    if n == 1 {
        return Ok(MaxNetTrace {
            states: vec![values.to_vec()],
            winner: 0,
            fell_back: false,
        });
    }
    let eps = config.epsilon.unwrap_or(1.0 / n as f64);
    if !(eps > 0.0 && eps < 1.0) || config.max_iters == 0 {
        return Err(OconError::InvalidMaxNet);
    }
    let fallback = argmax(values)?;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut y: Vec<f64> = if min < 0.0 {
        values.iter().map(|v| v - min).collect()
    } else {
        values.to_vec()
    };
    let mut states = vec![y.clone()];
    let done = |winner, fell_back, states| Ok(MaxNetTrace { states, winner, fell_back });

    if let Some(w) = single_positive(&y) {
        return done(w, false, states);
    }
    for _ in 0..config.max_iters {
        let total: f64 = y.iter().sum();
        y = y.iter().map(|&v| crate::neural::relu(v - eps * (total - v))).collect();
        states.push(y.clone());
        let positive: Vec<f64> = y.iter().copied().filter(|&v| v > 0.0).collect();
        match positive.len() {
            0 => return done(fallback, true, states),
            1 => return done(single_positive(&y).unwrap(), false, states),
            _ if positive.iter().all(|&v| v == positive[0]) => return done(fallback, true, states),
            _ => {}
        }
    }
    done(fallback, true, states)
}

fn single_positive(y: &[f64]) -> Option<usize> {
    let mut it = y.iter().enumerate().filter(|(_, &v)| v > 0.0);
    match (it.next(), it.next()) {
        (Some((i, _)), None) => Some(i),
        _ => None,
    }
}

pub fn maxnet(values: &[f64], config: &MaxNetConfig) -> Result<usize, OconError> {
    Ok(maxnet_trace(values, config)?.winner)
}

/// How the ensemble turns per-class probabilities into a label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Head {
    #[default]
    ArgMax,
    MaxNet(MaxNetConfig),
}

impl Head {
    pub fn decide(&self, probabilities: &[f64]) -> Result<usize, OconError> {
        match self {
            Head::ArgMax => argmax(probabilities),
            Head::MaxNet(cfg) => maxnet(probabilities, cfg),
        }
    }
}

/// One independent binary classifier per class, all with the same
/// architecture.
#[derive(Debug, Clone)]
pub struct OconEnsemble {
    pub task: Task,
    pub class_names: Vec<String>,
    pub nets: Vec<OneClassNet>,
    pub head: Head,
    pub master_seed: u64,
}

/// Seed of class `class`'s network under `master`.
pub fn class_seed(master: u64, class: usize) -> u64 {
    seed::derive_seed(master, &[seed::stream::CLASS, class as u64])
}

impl OconEnsemble {
    /// Fresh nets, one per class of `task`, each seeded from
    /// `(master_seed, class)`.
    pub fn new(task: Task, config: &MlpConfig, master_seed: u64) -> Result<Self, OconError> {
        let class_names = task.class_names();
        let nets = (0..class_names.len())
            .map(|c| {
                OneClassNet::new(MlpConfig {
                    seed: class_seed(master_seed, c),
                    ..config.clone()
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(OconEnsemble {
            task,
            class_names,
            nets,
            head: Head::ArgMax,
            master_seed,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.nets.len()
    }

    pub fn input_dim(&self) -> usize {
        self.nets.first().map(|n| n.input_dim()).unwrap_or(0)
    }

    /// Per-class sigmoid probabilities for one row, and the decided class.
    pub fn infer(&self, row: &[f64]) -> Result<(Vec<f64>, usize), OconError> {
        if row.len() != self.input_dim() {
            return Err(OconError::DimensionMismatch {
                expected: self.input_dim(),
                got: row.len(),
            });
        }
        let probs = self
            .nets
            .iter()
            .map(|n| n.predict_logits(row).map(|z| sigmoid(z[0])))
            .collect::<Result<Vec<_>, _>>()?;
        let label = self.head.decide(&probs)?;
        Ok((probs, label))
    }

    /// `probabilities[c][i]`: class `c`'s probability for row `i`.
    pub fn class_probabilities(&self, matrix: &FeatureMatrix) -> Result<Vec<Vec<f64>>, OconError> {
        if matrix.cols != self.input_dim() {
            return Err(OconError::DimensionMismatch {
                expected: self.input_dim(),
                got: matrix.cols,
            });
        }
        Ok(self
            .nets
            .iter()
            .map(|n| n.predict_proba(&matrix.values))
            .collect::<Result<Vec<_>, _>>()?)
    }

    /// Decided class per row.
    pub fn predict(&self, matrix: &FeatureMatrix) -> Result<Vec<usize>, OconError> {
        let probs = self.class_probabilities(matrix)?;
        (0..matrix.rows)
            .map(|i| {
                let v: Vec<f64> = probs.iter().map(|p| p[i]).collect();
                self.head.decide(&v)
            })
            .collect()
    }
}
