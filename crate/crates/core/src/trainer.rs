//! Per-class training with re-shuffled batch sets and the two-variable
//! early stopping rule, and concurrent training of a whole ensemble.

use std::collections::VecDeque;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{split_indices, DatasetError, SplitSpec};
use crate::features::{FeatureMatrix, Task, VariantKind};
use crate::neural::{NeuralError, OneClassNet};
use crate::ocon::{class_seed, one_hot_encode, EncodedSubset, OconEnsemble, OconError};
use crate::seed::{self, derive_seed, stream};

#[derive(Debug, Error, PartialEq)]
pub enum TrainError {
    #[error("invalid early-stop spec: {0}")]
    InvalidSpec(String),
    #[error("{specs} stop specs for {classes} classes")]
    SpecCount { specs: usize, classes: usize },
    #[error("{labels} labels for {rows} rows")]
    LabelCount { labels: usize, rows: usize },
    #[error(transparent)]
    Encode(#[from] OconError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Split(#[from] DatasetError),
    #[error("i/o error: {0}")]
    Io(String),
}

/// Escape condition and hard limits for one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EarlyStopSpec {
    /// Stop once the windowed training loss is below this...
    pub loss_threshold: f64,
    /// ...and the last test mini-batch accuracy is above this.
    pub accuracy_threshold: f64,
    /// Number of most recent per-sample training losses averaged.
    pub loss_window: usize,
    pub max_batch_sets: usize,
    pub max_wall_seconds: f64,
    pub epochs_per_set: usize,
    /// Maximum `|pos - neg| / total` of an accepted encoding.
    pub balancing_tolerance: f64,
    /// Re-encodings tried before an out-of-tolerance subset is used anyway.
    pub max_encode_attempts: usize,
}

impl Default for EarlyStopSpec {
    fn default() -> Self {
        EarlyStopSpec {
            loss_threshold: 0.2,
            accuracy_threshold: 0.9,
            loss_window: 50,
            max_batch_sets: 30,
            max_wall_seconds: 1800.0,
            epochs_per_set: 1000,
            balancing_tolerance: 0.01,
            max_encode_attempts: 20,
        }
    }
}

impl EarlyStopSpec {
    pub fn with_thresholds(loss: f64, accuracy: f64) -> Self {
        EarlyStopSpec {
            loss_threshold: loss,
            accuracy_threshold: accuracy,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::InvalidSpec(m));
        if !(self.loss_threshold >= 0.0) {
            return bad(format!("loss_threshold {} < 0", self.loss_threshold));
        }
        if !(0.0..=1.0).contains(&self.accuracy_threshold) {
            return bad(format!("accuracy_threshold {} outside [0, 1]", self.accuracy_threshold));
        }
        if self.loss_window == 0 || self.max_batch_sets == 0 || self.epochs_per_set == 0 {
            return bad("loss_window, max_batch_sets and epochs_per_set must be >= 1".into());
        }
        if !(self.max_wall_seconds > 0.0) {
            return bad(format!("max_wall_seconds {} <= 0", self.max_wall_seconds));
        }
        if !(self.balancing_tolerance > 0.0 && self.balancing_tolerance < 1.0) {
            return bad(format!("balancing_tolerance {} outside (0, 1)", self.balancing_tolerance));
        }
        Ok(())
    }

    /// Reference thresholds, one spec per class.
    ///
    /// Phonemes: loss 0.2 / accuracy 90% on steady-state variants, 0.15 / 95%
    /// on time tracks. Speakers: 0.36 / 80%, 0.08 / 97%, 0.45 / 80% for
    /// children, men, women.
    pub fn reference(task: Task, variant: VariantKind) -> Vec<EarlyStopSpec> {
        match task {
            Task::Speaker => [(0.36, 0.80), (0.08, 0.97), (0.45, 0.80)]
                .iter()
                .map(|&(l, a)| Self::with_thresholds(l, a))
                .collect(),
            Task::Phoneme => {
                let spec = match variant {
                    VariantKind::Ss3 | VariantKind::Ss3F0 => Self::with_thresholds(0.2, 0.90),
                    VariantKind::Tt12 | VariantKind::Tt12F0 => Self::with_thresholds(0.15, 0.95),
                };
                vec![spec; task.n_classes()]
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    Converged,
    MaxBatchSets,
    WallClock,
    Failed,
}

/// One end-of-epoch observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Global epoch counter.
    pub step: usize,
    pub batch_set: usize,
    /// Windowed training loss.
    pub loss: f64,
    /// Last test mini-batch accuracy.
    pub test_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub class: usize,
    pub epochs: usize,
    pub batch_sets: usize,
    pub final_loss: f64,
    /// Last test mini-batch accuracy at the final epoch.
    pub final_batch_accuracy: f64,
    /// Accuracy over the whole test split of the final batch set.
    pub test_accuracy: f64,
    pub wall_seconds: f64,
    pub stop_reason: StopReason,
    /// Batch sets trained on an encoding outside the balancing tolerance.
    pub unbalanced_sets: usize,
    pub curve: Vec<CurvePoint>,
    pub error: Option<String>,
}

impl TrainReport {
    fn failed(class: usize, error: String) -> Self {
        TrainReport {
            class,
            epochs: 0,
            batch_sets: 0,
            final_loss: f64::NAN,
            final_batch_accuracy: 0.0,
            test_accuracy: 0.0,
            wall_seconds: 0.0,
            stop_reason: StopReason::Failed,
            unbalanced_sets: 0,
            curve: Vec::new(),
            error: Some(error),
        }
    }

    pub fn write_curve_csv(&self, path: impl AsRef<Path>) -> Result<(), TrainError> {
        let io = |e: std::io::Error| TrainError::Io(format!("{}: {e}", path.as_ref().display()));
        let mut f = std::io::BufWriter::new(std::fs::File::create(path.as_ref()).map_err(io)?);
        writeln!(f, "step,loss,test_acc").map_err(io)?;
        for p in &self.curve {
            writeln!(f, "{},{},{}", p.step, p.loss, p.test_acc).map_err(io)?;
        }
        f.flush().map_err(io)
    }
}

/// True iff `|positives - negatives| / total <= tolerance`.
pub fn balancing_check(encoded: &EncodedSubset, tolerance: f64) -> bool {
    balance_ratio(encoded.positives, encoded.negatives()) <= tolerance
}

pub fn balance_ratio(positives: usize, negatives: usize) -> f64 {
    let total = positives + negatives;
    if total == 0 {
        return 0.0;
    }
    positives.abs_diff(negatives) as f64 / total as f64
}

/// Fraction of rows `idx` of `subset` that `net` classifies correctly at
/// the 0.5 threshold.
pub fn subset_accuracy(net: &OneClassNet, subset: &EncodedSubset, idx: &[usize]) -> Result<f64, NeuralError> {
    if idx.is_empty() {
        return Ok(0.0);
    }
    let (x, y) = subset.gather(idx);
    let p = net.predict_proba(&x)?;
    let correct = p.iter().zip(&y).filter(|(&p, &y)| (p >= 0.5) == (y == 1.0)).count();
    Ok(correct as f64 / idx.len() as f64)
}

/// One pass over `train` in shuffled mini-batches. Returns the per-sample
/// losses in order.
pub fn run_epoch(
    net: &mut OneClassNet,
    subset: &EncodedSubset,
    train: &[usize],
    rng: &mut seed::Rng,
) -> Result<Vec<f64>, NeuralError> {
    let mut order = train.to_vec();
    order.shuffle(rng);
    let bs = net.config().batch_size;
    let mut losses = Vec::with_capacity(order.len());
    for chunk in order.chunks(bs) {
        let (x, y) = subset.gather(chunk);
        losses.extend(net.train_batch(&x, &y)?);
    }
    Ok(losses)
}

fn encode_balanced(
    matrix: &FeatureMatrix,
    labels: &[usize],
    n_classes: usize,
    true_class: usize,
    stop: &EarlyStopSpec,
    seed: u64,
    batch_set: usize,
) -> Result<(EncodedSubset, bool), OconError> {
    let attempts = stop.max_encode_attempts.max(1);
    let mut last = None;
    for attempt in 0..attempts {
        let s = derive_seed(seed, &[stream::ENCODE, batch_set as u64, attempt as u64]);
        let enc = one_hot_encode(matrix, labels, n_classes, true_class, s)?;
        if balancing_check(&enc, stop.balancing_tolerance) {
            return Ok((enc, true));
        }
        last = Some(enc);
    }
    Ok((last.unwrap(), false))
}

/// Trains `net` as the detector of `true_class`.
///
/// Each batch set draws a fresh balanced encoding, splits it 70/15/15 and
/// runs up to `epochs_per_set` epochs. After every epoch the windowed loss
/// and the accuracy on the final test mini-batch are checked against the
/// escape thresholds. The network and optimiser state carry over between
/// batch sets. The wall-clock cap is checked after every mini-batch step.
pub fn train_one_class(
    net: &mut OneClassNet,
    matrix: &FeatureMatrix,
    labels: &[usize],
    n_classes: usize,
    true_class: usize,
    stop: &EarlyStopSpec,
    seed: u64,
) -> Result<TrainReport, TrainError> {
    stop.validate()?;
    if labels.len() != matrix.rows {
        return Err(TrainError::LabelCount {
            labels: labels.len(),
            rows: matrix.rows,
        });
    }
    let start = Instant::now();
    let bs = net.config().batch_size;
    let mut window: VecDeque<f64> = VecDeque::with_capacity(stop.loss_window);
    let mut report = TrainReport {
        class: true_class,
        epochs: 0,
        batch_sets: 0,
        final_loss: f64::NAN,
        final_batch_accuracy: 0.0,
        test_accuracy: 0.0,
        wall_seconds: 0.0,
        stop_reason: StopReason::MaxBatchSets,
        unbalanced_sets: 0,
        curve: Vec::new(),
        error: None,
    };

    'sets: for set in 0..stop.max_batch_sets {
        let (subset, balanced) = encode_balanced(matrix, labels, n_classes, true_class, stop, seed, set)?;
        report.unbalanced_sets += usize::from(!balanced);
        report.batch_sets = set + 1;
        let split_seed = derive_seed(seed, &[stream::SPLIT, set as u64]);
        let (train, _dev, test) = split_indices(subset.len(), &SplitSpec::standard(split_seed))?;
        let last_test: Vec<usize> = match test.len() % bs {
            0 => test[test.len().saturating_sub(bs)..].to_vec(),
            r => test[test.len() - r..].to_vec(),
        };
        let mut rng = seed::derived_rng(seed, &[stream::SHUFFLE, set as u64]);

        for _ in 0..stop.epochs_per_set {
            let mut order = train.clone();
            order.shuffle(&mut rng);
            for chunk in order.chunks(bs) {
                let (x, y) = subset.gather(chunk);
                for l in net.train_batch(&x, &y)? {
                    if window.len() == stop.loss_window {
                        window.pop_front();
                    }
                    window.push_back(l);
                }
                if start.elapsed().as_secs_f64() >= stop.max_wall_seconds {
                    report.stop_reason = StopReason::WallClock;
                    report.test_accuracy = subset_accuracy(net, &subset, &test)?;
                    break 'sets;
                }
            }
            let loss = window.iter().sum::<f64>() / window.len().max(1) as f64;
            let acc = subset_accuracy(net, &subset, &last_test)?;
            report.curve.push(CurvePoint {
                step: report.epochs,
                batch_set: set,
                loss,
                test_acc: acc,
            });
            report.epochs += 1;
            report.final_loss = loss;
            report.final_batch_accuracy = acc;
            if loss < stop.loss_threshold && acc > stop.accuracy_threshold {
                report.stop_reason = StopReason::Converged;
                report.test_accuracy = subset_accuracy(net, &subset, &test)?;
                break 'sets;
            }
        }
        report.test_accuracy = subset_accuracy(net, &subset, &test)?;
    }
    report.wall_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Number of worker threads to use by default.
pub fn default_jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Trains every net of `ensemble` on its own class, up to `jobs` at a time.
///
/// `specs` holds one spec per class, or a single spec shared by all. Class
/// `c` trains with seed `class_seed(master_seed, c)`, so results do not
/// depend on `jobs`. A class that fails is reported with
/// [`StopReason::Failed`] and leaves the others running.
pub fn train_ensemble(
    ensemble: &mut OconEnsemble,
    matrix: &FeatureMatrix,
    specs: &[EarlyStopSpec],
    master_seed: u64,
    jobs: usize,
) -> Result<Vec<TrainReport>, TrainError> {
    let n = ensemble.n_classes();
    if n == 0 {
        return Ok(Vec::new());
    }
    if specs.len() != n && specs.len() != 1 {
        return Err(TrainError::SpecCount {
            specs: specs.len(),
            classes: n,
        });
    }
    let labels = matrix.labels(ensemble.task);
    let spec_for = |c: usize| if specs.len() == 1 { &specs[0] } else { &specs[c] };
    let run = |c: usize, net: &mut OneClassNet| {
        train_one_class(net, matrix, &labels, n, c, spec_for(c), class_seed(master_seed, c))
            .unwrap_or_else(|e| TrainReport::failed(c, e.to_string()))
    };

    let jobs = jobs.clamp(1, n);
    if jobs == 1 {
        return Ok(ensemble.nets.iter_mut().enumerate().map(|(c, net)| run(c, net)).collect());
    }
    let nets: Vec<Mutex<&mut OneClassNet>> = ensemble.nets.iter_mut().map(Mutex::new).collect();
    let reports: Vec<Mutex<Option<TrainReport>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let c = next.fetch_add(1, Ordering::Relaxed);
                if c >= n {
                    break;
                }
                let mut net = nets[c].lock().unwrap();
                let r = run(c, &mut net);
                *reports[c].lock().unwrap() = Some(r);
            });
        }
    });
    Ok(reports.into_iter().map(|r| r.into_inner().unwrap().unwrap()).collect())
}
