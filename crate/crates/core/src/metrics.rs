//! Binary and ensemble evaluation: confusion counts, precision / recall /
//! F1, ROC with trapezoid AUC, DET curves and the related error rates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureMatrix;
use crate::ocon::{OconEnsemble, OconError};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("{probabilities} probabilities for {labels} labels")]
    LengthMismatch { probabilities: usize, labels: usize },
    #[error("both positive and negative labels are required")]
    SingleClassInput,
    #[error(transparent)]
    Ocon(#[from] OconError),
}

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn new(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        ConfusionCounts { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

fn check_lengths(probabilities: &[f64], labels: &[bool]) -> Result<(), MetricsError> {
    if probabilities.len() != labels.len() {
        return Err(MetricsError::LengthMismatch {
            probabilities: probabilities.len(),
            labels: labels.len(),
        });
    }
    Ok(())
}

/// Counts with a sample predicted positive iff `p >= threshold`.
pub fn confusion(probabilities: &[f64], labels: &[bool], threshold: f64) -> Result<ConfusionCounts, MetricsError> {
    check_lengths(probabilities, labels)?;
    let mut c = ConfusionCounts::default();
    for (&p, &y) in probabilities.iter().zip(labels) {
        match (p >= threshold, y) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// A ratio; `undefined` marks a 0/0 that was reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratio {
    pub value: f64,
    pub undefined: bool,
}

impl Ratio {
    pub fn of(num: usize, den: usize) -> Self {
        if den == 0 {
            Ratio {
                value: 0.0,
                undefined: true,
            }
        } else {
            Ratio {
                value: num as f64 / den as f64,
                undefined: false,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf1 {
    pub accuracy: Ratio,
    pub precision: Ratio,
    pub recall: Ratio,
    pub f1: Ratio,
}

pub fn prf1(c: &ConfusionCounts) -> Prf1 {
    let precision = Ratio::of(c.tp, c.tp + c.fp);
    let recall = Ratio::of(c.tp, c.tp + c.fn_);
    // 2PR / (P + R) = 2TP / (2TP + FP + FN)
    let f1 = Ratio::of(2 * c.tp, 2 * c.tp + c.fp + c.fn_);
    Prf1 {
        accuracy: Ratio::of(c.tp + c.tn, c.total()),
        precision,
        recall,
        f1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRates {
    pub er: Ratio,
    pub fdr: Ratio,
    pub for_: Ratio,
    pub npv: Ratio,
}

pub fn det_err_rates(c: &ConfusionCounts) -> ErrorRates {
    ErrorRates {
        er: Ratio::of(c.fp + c.fn_, c.total()),
        fdr: Ratio::of(c.fp, c.fp + c.tp),
        for_: Ratio::of(c.fn_, c.fn_ + c.tn),
        npv: Ratio::of(c.tn, c.tn + c.fn_),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
}

/// ROC points ordered by decreasing threshold, from (0, 0) to (1, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

fn sweep(probabilities: &[f64], labels: &[bool]) -> Result<(Vec<(f64, usize, usize)>, usize, usize), MetricsError> {
    check_lengths(probabilities, labels)?;
    let pos = labels.iter().filter(|&&y| y).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(MetricsError::SingleClassInput);
    }
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| probabilities[b].total_cmp(&probabilities[a]));
    // (threshold, tp, fp) for every distinct threshold, descending
    let mut steps = Vec::new();
    let (mut tp, mut fp) = (0, 0);
    let mut i = 0;
    while i < order.len() {
        let t = probabilities[order[i]];
        while i < order.len() && probabilities[order[i]] == t {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        steps.push((t, tp, fp));
    }
    Ok((steps, pos, neg))
}

/// ROC over every distinct score and its trapezoid-rule area.
pub fn roc_auc(probabilities: &[f64], labels: &[bool]) -> Result<(RocCurve, f64), MetricsError> {
    let (steps, pos, neg) = sweep(probabilities, labels)?;
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        tpr: 0.0,
        fpr: 0.0,
    }];
    for (t, tp, fp) in steps {
        points.push(RocPoint {
            threshold: t,
            tpr: tp as f64 / pos as f64,
            fpr: fp as f64 / neg as f64,
        });
    }
    let auc = points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum();
    Ok((RocCurve { points }, auc))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub fnr: f64,
}

/// (FPR, FNR) per distinct threshold, by decreasing threshold, bracketed by
/// an all-negative point (FPR 0) and an all-positive point (FNR 0).
pub fn det_curve(probabilities: &[f64], labels: &[bool]) -> Result<Vec<DetPoint>, MetricsError> {
    let (roc, _) = roc_auc(probabilities, labels)?;
    Ok(roc
        .points
        .iter()
        .map(|p| DetPoint {
            threshold: p.threshold,
            fpr: p.fpr,
            fnr: 1.0 - p.tpr,
        })
        .collect())
}

/// Fraction of rows whose decided class equals `labels`.
pub fn ocon_accuracy(ensemble: &OconEnsemble, matrix: &FeatureMatrix, labels: &[usize]) -> Result<f64, MetricsError> {
    if labels.len() != matrix.rows {
        return Err(MetricsError::LengthMismatch {
            probabilities: matrix.rows,
            labels: labels.len(),
        });
    }
    if labels.is_empty() {
        return Ok(0.0);
    }
    let pred = ensemble.predict(matrix)?;
    let hits = pred.iter().zip(labels).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Per-class evaluation of an ensemble over a labelled matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassEvaluation {
    pub class: String,
    pub counts: ConfusionCounts,
    pub prf1: Prf1,
    pub rates: ErrorRates,
    pub auc: Option<f64>,
    pub roc: Option<RocCurve>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleEvaluation {
    pub classes: Vec<ClassEvaluation>,
    pub ocon_accuracy: f64,
}

impl EnsembleEvaluation {
    pub fn mean_class_accuracy(&self) -> f64 {
        let n = self.classes.len().max(1) as f64;
        self.classes.iter().map(|c| c.prf1.accuracy.value).sum::<f64>() / n
    }
}

/// One-vs-rest metrics of every class net plus the ensemble accuracy.
pub fn evaluate_ensemble(ensemble: &OconEnsemble, matrix: &FeatureMatrix) -> Result<EnsembleEvaluation, MetricsError> {
    let labels = matrix.labels(ensemble.task);
    let probs = ensemble.class_probabilities(matrix)?;
    let mut classes = Vec::with_capacity(probs.len());
    for (c, p) in probs.iter().enumerate() {
        let y: Vec<bool> = labels.iter().map(|&l| l == c).collect();
        let counts = confusion(p, &y, DEFAULT_THRESHOLD)?;
        let (roc, auc) = match roc_auc(p, &y) {
            Ok((r, a)) => (Some(r), Some(a)),
            Err(MetricsError::SingleClassInput) => (None, None),
            Err(e) => return Err(e),
        };
        classes.push(ClassEvaluation {
            class: ensemble.class_names[c].clone(),
            counts,
            prf1: prf1(&counts),
            rates: det_err_rates(&counts),
            auc,
            roc,
        });
    }
    Ok(EnsembleEvaluation {
        classes,
        ocon_accuracy: ocon_accuracy(ensemble, matrix, &labels)?,
    })
}
