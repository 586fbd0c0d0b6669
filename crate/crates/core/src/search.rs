//! Staged grid search over architecture and learning hyper-parameters.
//!
//! A stage sweeps the Cartesian product of its value lists. Every
//! combination is trained on every class and fold for a fixed number of
//! epochs and scored by held-out fold accuracy. The winner's values become
//! fixed hyper-parameters of the next stage.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::kfold_indices;
use crate::features::{FeatureMatrix, Task, VariantKind};
use crate::neural::{MlpConfig, OneClassNet, OptimizerKind};
use crate::ocon::one_hot_encode;
use crate::seed::{self, derive_seed, stream};
use crate::trainer::{run_epoch, subset_accuracy};

#[derive(Debug, Error, PartialEq)]
pub enum SearchError {
    #[error("stage {stage:?}: swept hyper-parameter {name:?} has no values")]
    EmptySweep { stage: String, name: String },
    #[error("hyper-parameter {0:?} is inherited but also swept; list it in overrides")]
    ConflictingHP(String),
    #[error("unknown hyper-parameter {0:?}")]
    UnknownHp(String),
    #[error("bad value for {name}: {value}")]
    BadValue { name: String, value: String },
    #[error("invalid stage: {0}")]
    InvalidStage(String),
    #[error("i/o error: {0}")]
    Io(String),
}

/// A hyper-parameter value as written in stage files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HpValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
}

impl HpValue {
    fn as_f64(&self) -> Option<f64> {
        match *self {
            HpValue::Int(i) => Some(i as f64),
            HpValue::Float(f) => Some(f),
            _ => None,
        }
    }

    fn as_usize(&self) -> Option<usize> {
        match *self {
            HpValue::Int(i) if i >= 0 => Some(i as usize),
            HpValue::Float(f) if f >= 0.0 && f.fract() == 0.0 => Some(f as usize),
            _ => None,
        }
    }
}

impl fmt::Display for HpValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HpValue::Bool(b) => write!(f, "{b}"),
            HpValue::Int(i) => write!(f, "{i}"),
            HpValue::Float(x) => write!(f, "{x}"),
            HpValue::Text(s) => write!(f, "{s}"),
        }
    }
}

/// Recognised hyper-parameter names.
pub const HP_NAMES: [&str; 9] = [
    "hidden_layers",
    "hidden_units",
    "optimizer",
    "lr",
    "keep_input",
    "keep_hidden",
    "batch_norm",
    "l2_lambda",
    "batch_size",
];

/// Sets hyper-parameter `name` on `config`.
pub fn apply_hp(config: &mut MlpConfig, name: &str, value: &HpValue) -> Result<(), SearchError> {
    let bad = || SearchError::BadValue {
        name: name.to_string(),
        value: value.to_string(),
    };
    let width = config.hidden_layers.first().copied().unwrap_or(100);
    let depth = config.hidden_layers.len();
    match name {
        "hidden_layers" => config.hidden_layers = vec![width; value.as_usize().ok_or_else(bad)?],
        "hidden_units" => config.hidden_layers = vec![value.as_usize().ok_or_else(bad)?; depth.max(1)],
        "optimizer" => match value {
            HpValue::Text(s) => config.optimizer = s.parse::<OptimizerKind>().map_err(|_| bad())?,
            _ => return Err(bad()),
        },
        "lr" => config.lr = value.as_f64().ok_or_else(bad)?,
        "keep_input" => config.keep_input = value.as_f64().ok_or_else(bad)?,
        "keep_hidden" => config.keep_hidden = value.as_f64().ok_or_else(bad)?,
        "batch_norm" => match value {
            HpValue::Bool(b) => config.batch_norm = *b,
            _ => return Err(bad()),
        },
        "l2_lambda" => config.l2_lambda = value.as_f64().ok_or_else(bad)?,
        "batch_size" => config.batch_size = value.as_usize().ok_or_else(bad)?,
        other => return Err(SearchError::UnknownHp(other.to_string())),
    }
    Ok(())
}

/// One swept hyper-parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub name: String,
    pub values: Vec<HpValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridStage {
    pub name: String,
    #[serde(default)]
    pub fixed: BTreeMap<String, HpValue>,
    /// Enumerated with the first entry varying slowest.
    pub swept: Vec<Sweep>,
    pub folds: usize,
    pub epochs: usize,
    #[serde(default = "all_phonemes")]
    pub classes: Vec<usize>,
    #[serde(default = "default_task")]
    pub task: Task,
    #[serde(default = "default_variant")]
    pub variant: VariantKind,
    /// Names this stage sets itself even when an earlier winner has them.
    #[serde(default)]
    pub overrides: Vec<String>,
}

fn all_phonemes() -> Vec<usize> {
    (0..12).collect()
}

fn default_task() -> Task {
    Task::Phoneme
}

fn default_variant() -> VariantKind {
    VariantKind::Ss3
}

/// Ordered `(name, value)` assignments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Combination(pub Vec<(String, HpValue)>);

impl fmt::Display for Combination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
        write!(f, "{}", parts.join(";"))
    }
}

impl GridStage {
    pub fn validate(&self) -> Result<(), SearchError> {
        for s in &self.swept {
            if s.values.is_empty() {
                return Err(SearchError::EmptySweep {
                    stage: self.name.clone(),
                    name: s.name.clone(),
                });
            }
        }
        for name in self.fixed.keys().chain(self.swept.iter().map(|s| &s.name)) {
            if !HP_NAMES.contains(&name.as_str()) {
                return Err(SearchError::UnknownHp(name.clone()));
            }
        }
        if self.folds < 2 || self.epochs == 0 {
            return Err(SearchError::InvalidStage(format!(
                "{}: folds must be >= 2 and epochs >= 1",
                self.name
            )));
        }
        if let Some(&c) = self.classes.iter().find(|&&c| c >= self.task.n_classes()) {
            return Err(SearchError::InvalidStage(format!("{}: class {c} out of range", self.name)));
        }
        Ok(())
    }

    /// Cartesian product of the sweeps.
    pub fn enumerate(&self) -> Result<Vec<Combination>, SearchError> {
        let mut out = vec![Vec::new()];
        for s in &self.swept {
            if s.values.is_empty() {
                return Err(SearchError::EmptySweep {
                    stage: self.name.clone(),
                    name: s.name.clone(),
                });
            }
            out = out
                .into_iter()
                .flat_map(|prefix: Vec<(String, HpValue)>| {
                    s.values.iter().map(move |v| {
                        let mut c = prefix.clone();
                        c.push((s.name.clone(), v.clone()));
                        c
                    })
                })
                .collect();
        }
        Ok(out.into_iter().map(Combination).collect())
    }

    /// `combinations * classes * folds`.
    pub fn cycles(&self) -> Result<usize, SearchError> {
        Ok(self.enumerate()?.len() * self.classes.len() * self.folds)
    }

    /// Network config for `combo` on inputs of width `input_dim`.
    pub fn config_for(&self, combo: &Combination, input_dim: usize) -> Result<MlpConfig, SearchError> {
        let mut cfg = MlpConfig::with_input_dim(input_dim);
        // depth before width so that "hidden_units" sizes every layer
        let mut entries: Vec<(&String, &HpValue)> = self.fixed.iter().chain(combo.0.iter().map(|(k, v)| (k, v))).collect();
        entries.sort_by_key(|(k, _)| k.as_str() != "hidden_layers");
        for (k, v) in entries {
            apply_hp(&mut cfg, k, v)?;
        }
        cfg.validate()
            .map_err(|e| SearchError::InvalidStage(format!("{}: {e}", self.name)))?;
        Ok(cfg)
    }

    /// Same stage with reduced epochs and folds.
    pub fn smoke(&self) -> GridStage {
        GridStage {
            epochs: SMOKE_EPOCHS,
            folds: SMOKE_FOLDS,
            ..self.clone()
        }
    }
}

pub const SMOKE_EPOCHS: usize = 50;
pub const SMOKE_FOLDS: usize = 2;

fn floats(v: &[f64]) -> Vec<HpValue> {
    v.iter().map(|&x| HpValue::Float(x)).collect()
}

fn sweep(name: &str, values: Vec<HpValue>) -> Sweep {
    Sweep {
        name: name.into(),
        values,
    }
}

/// The four reference stages: architecture, dropout, batch-norm, L2.
pub fn reference_stages() -> Vec<GridStage> {
    let fixed = |pairs: &[(&str, HpValue)]| pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
    let stage = |name: &str, fixed, swept, folds, epochs, overrides: &[&str]| GridStage {
        name: name.into(),
        fixed,
        swept,
        folds,
        epochs,
        classes: all_phonemes(),
        task: Task::Phoneme,
        variant: VariantKind::Ss3,
        overrides: overrides.iter().map(|s| s.to_string()).collect(),
    };
    vec![
        stage(
            "architecture",
            fixed(&[
                ("hidden_layers", HpValue::Int(1)),
                ("batch_size", HpValue::Int(32)),
                ("keep_input", HpValue::Float(1.0)),
                ("keep_hidden", HpValue::Float(1.0)),
                ("batch_norm", HpValue::Bool(false)),
                ("l2_lambda", HpValue::Float(0.0)),
            ]),
            vec![
                sweep("hidden_units", vec![HpValue::Int(10), HpValue::Int(50), HpValue::Int(100)]),
                sweep("optimizer", vec![HpValue::Text("Adam".into()), HpValue::Text("RMSProp".into())]),
                sweep("lr", floats(&[1e-3, 1e-4, 1e-5])),
            ],
            3,
            1000,
            &[],
        ),
        stage(
            "dropout",
            fixed(&[("lr", HpValue::Float(1e-4))]),
            vec![
                sweep("keep_input", floats(&[0.8, 0.9])),
                sweep("keep_hidden", floats(&[0.5, 0.6, 0.7, 0.8, 0.9, 1.0])),
            ],
            6,
            3000,
            &["lr"],
        ),
        stage(
            "batch_norm",
            fixed(&[("batch_norm", HpValue::Bool(true)), ("batch_size", HpValue::Int(32))]),
            vec![sweep("lr", floats(&[1e-3, 1e-4, 1e-5]))],
            10,
            1000,
            &["lr", "batch_norm"],
        ),
        stage(
            "l2",
            fixed(&[("lr", HpValue::Float(1e-4)), ("batch_size", HpValue::Int(32))]),
            vec![sweep("l2_lambda", floats(&[1e-2, 1e-3, 1e-4]))],
            10,
            1000,
            &["lr"],
        ),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    /// Position in enumeration order.
    pub index: usize,
    pub combination: Combination,
    /// `accuracies[i][f]` for the i-th stage class and fold `f`.
    pub accuracies: Vec<Vec<f64>>,
    pub mean_acc: f64,
    pub mean_time_s: f64,
    pub failed_cycles: usize,
}

impl TrialResult {
    pub fn class_means(&self) -> Vec<f64> {
        self.accuracies
            .iter()
            .map(|f| f.iter().sum::<f64>() / f.len().max(1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageOutcome {
    pub stage: String,
    pub classes: Vec<usize>,
    pub best: Combination,
    /// Best first; ties keep enumeration order.
    pub ranked: Vec<TrialResult>,
    /// Stage fixed values plus the winner's values.
    pub inherited: BTreeMap<String, HpValue>,
}

/// Stable ranking by mean accuracy, highest first.
pub fn rank(mut trials: Vec<TrialResult>) -> Vec<TrialResult> {
    trials.sort_by(|a, b| b.mean_acc.total_cmp(&a.mean_acc));
    trials
}

fn run_cycle(
    stage: &GridStage,
    cfg: &MlpConfig,
    matrix: &FeatureMatrix,
    labels: &[usize],
    class: usize,
    fold: usize,
    master_seed: u64,
) -> Result<f64, String> {
    let trial_seed = derive_seed(master_seed, &[stream::TRIAL, class as u64]);
    let subset = one_hot_encode(matrix, labels, stage.task.n_classes(), class, trial_seed).map_err(|e| e.to_string())?;
    let folds = kfold_indices(subset.len(), stage.folds, trial_seed).map_err(|e| e.to_string())?;
    let (train, val) = &folds[fold];
    let mut net = OneClassNet::new(MlpConfig {
        seed: derive_seed(trial_seed, &[stream::INIT, fold as u64]),
        ..cfg.clone()
    })
    .map_err(|e| e.to_string())?;
    let mut rng = seed::derived_rng(trial_seed, &[stream::SHUFFLE, fold as u64]);
    for _ in 0..stage.epochs {
        run_epoch(&mut net, &subset, train, &mut rng).map_err(|e| e.to_string())?;
    }
    subset_accuracy(&net, &subset, val).map_err(|e| e.to_string())
}

/// Trains every combination x class x fold, up to `jobs` cycles at once.
/// `matrix` must already be scaled and match the stage variant. A failed
/// cycle scores 0 and is counted in [`TrialResult::failed_cycles`].
pub fn run_stage(stage: &GridStage, matrix: &FeatureMatrix, master_seed: u64, jobs: usize) -> Result<StageOutcome, SearchError> {
    run_stage_with_progress(stage, matrix, master_seed, jobs, |_, _| {})
}

/// [`run_stage`] reporting `(finished, total)` cycles as they complete.
pub fn run_stage_with_progress(
    stage: &GridStage,
    matrix: &FeatureMatrix,
    master_seed: u64,
    jobs: usize,
    progress: impl Fn(usize, usize) + Sync,
) -> Result<StageOutcome, SearchError> {
    stage.validate()?;
    let combos = stage.enumerate()?;
    let configs = combos
        .iter()
        .map(|c| stage.config_for(c, matrix.cols))
        .collect::<Result<Vec<_>, _>>()?;
    let labels = matrix.labels(stage.task);
    let (nc, nk) = (stage.classes.len(), stage.folds);
    let total = combos.len() * nc * nk;
    let cells: Vec<Mutex<(f64, f64, bool)>> = (0..total).map(|_| Mutex::new((0.0, 0.0, false))).collect();
    let next = AtomicUsize::new(0);
    let done = AtomicUsize::new(0);

    let work = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        if i >= total {
            break;
        }
        let (combo, rest) = (i / (nc * nk), i % (nc * nk));
        let (ci, fold) = (rest / nk, rest % nk);
        let start = Instant::now();
        let r = run_cycle(stage, &configs[combo], matrix, &labels, stage.classes[ci], fold, master_seed);
        let secs = start.elapsed().as_secs_f64();
        *cells[i].lock().unwrap() = match r {
            Ok(acc) => (acc, secs, false),
            Err(_) => (0.0, secs, true),
        };
        progress(done.fetch_add(1, Ordering::Relaxed) + 1, total);
    };
    let jobs = jobs.clamp(1, total.max(1));
    if jobs == 1 {
        work();
    } else {
        std::thread::scope(|s| {
            for _ in 0..jobs {
                s.spawn(work);
            }
        });
    }

    let cells: Vec<(f64, f64, bool)> = cells.into_iter().map(|c| c.into_inner().unwrap()).collect();
    let trials: Vec<TrialResult> = combos
        .into_iter()
        .enumerate()
        .map(|(t, combination)| {
            let block = &cells[t * nc * nk..(t + 1) * nc * nk];
            let accuracies = block.chunks(nk).map(|f| f.iter().map(|c| c.0).collect()).collect();
            let n = block.len().max(1) as f64;
            TrialResult {
                index: t,
                combination,
                accuracies,
                mean_acc: block.iter().map(|c| c.0).sum::<f64>() / n,
                mean_time_s: block.iter().map(|c| c.1).sum::<f64>() / n,
                failed_cycles: block.iter().filter(|c| c.2).count(),
            }
        })
        .collect();
    let ranked = rank(trials);
    let best = ranked.first().map(|t| t.combination.clone()).unwrap_or(Combination(Vec::new()));
    let mut inherited = stage.fixed.clone();
    inherited.extend(best.0.iter().cloned());
    Ok(StageOutcome {
        stage: stage.name.clone(),
        classes: stage.classes.clone(),
        best,
        ranked,
        inherited,
    })
}

/// Carries `outcome`'s fixed and winning values into `next`. `next`'s own
/// fixed and swept settings take precedence; a winning name that `next`
/// sweeps without listing it in `next.overrides` is a conflict.
pub fn inherit(outcome: &StageOutcome, next: &GridStage) -> Result<GridStage, SearchError> {
    let mut out = next.clone();
    let swept = |name: &str| next.swept.iter().any(|s| s.name == name);
    for (name, _) in &outcome.best.0 {
        if swept(name) && !next.overrides.contains(name) {
            return Err(SearchError::ConflictingHP(name.clone()));
        }
    }
    for (name, value) in &outcome.inherited {
        if next.overrides.contains(name) || swept(name) || next.fixed.contains_key(name) {
            continue;
        }
        out.fixed.insert(name.clone(), value.clone());
    }
    Ok(out)
}

/// Runs `stages` in order, each inheriting from the previous outcome.
pub fn run_pipeline(
    stages: &[GridStage],
    matrix: &FeatureMatrix,
    master_seed: u64,
    jobs: usize,
    mut on_stage: impl FnMut(&GridStage, &StageOutcome),
) -> Result<Vec<StageOutcome>, SearchError> {
    let mut outcomes: Vec<StageOutcome> = Vec::new();
    for (i, stage) in stages.iter().enumerate() {
        let stage = match outcomes.last() {
            Some(prev) => inherit(prev, stage)?,
            None => stage.clone(),
        };
        let seed = derive_seed(master_seed, &[stream::TRIAL, 1000 + i as u64]);
        let o = run_stage(&stage, matrix, seed, jobs)?;
        on_stage(&stage, &o);
        outcomes.push(o);
    }
    Ok(outcomes)
}

/// Ranked results as CSV: combination, mean_acc, mean_time_s, then one
/// mean-accuracy column per class.
pub fn write_csv(outcome: &StageOutcome, class_names: &[String], path: impl AsRef<Path>) -> Result<(), SearchError> {
    let io = |e: std::io::Error| SearchError::Io(format!("{}: {e}", path.as_ref().display()));
    let mut f = std::io::BufWriter::new(std::fs::File::create(path.as_ref()).map_err(io)?);
    let mut header = vec!["combination".to_string(), "mean_acc".into(), "mean_time_s".into()];
    header.extend(outcome.classes.iter().map(|&c| class_names.get(c).cloned().unwrap_or_else(|| c.to_string())));
    writeln!(f, "{}", header.join(",")).map_err(io)?;
    for t in &outcome.ranked {
        let mut row = vec![t.combination.to_string(), t.mean_acc.to_string(), t.mean_time_s.to_string()];
        row.extend(t.class_means().iter().map(|a| a.to_string()));
        writeln!(f, "{}", row.join(",")).map_err(io)?;
    }
    f.flush().map_err(io)
}
