use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use ocon_core::checkpoint::{checkpoint_files, Checkpoint};
use ocon_core::features::{min_max_fit_transform, Task, VariantKind};
use ocon_core::neural::MlpConfig;
use ocon_core::ocon::{Head, MaxNetConfig, OconEnsemble};
use ocon_core::trainer::{train_ensemble, EarlyStopSpec, StopReason, TrainReport};
use serde::{Deserialize, Serialize};

use super::{read_json, resolve_jobs, resolve_seed, RunInfo};
use crate::data::DataSource;
use crate::error::{core, CliError};
use crate::manifest::{write_json, RunManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HeadKind {
    Argmax,
    Maxnet,
}

impl HeadKind {
    fn head(self) -> Head {
        match self {
            HeadKind::Argmax => Head::ArgMax,
            HeadKind::Maxnet => Head::MaxNet(MaxNetConfig::default()),
        }
    }
}

/// Trains one binary network per class and writes the checkpoint, learning
/// curves and per-class reports.
#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub source: DataSource,
    /// Feature variant: ss3, ss3-f0, tt12 or tt12-f0.
    #[arg(long)]
    pub variant: Option<VariantKind>,
    /// phoneme (12 classes) or speaker (3 classes).
    #[arg(long)]
    pub task: Option<Task>,
    /// JSON training config; flags override its values.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Classes trained in parallel; defaults to the available cores.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, value_enum)]
    pub head: Option<HeadKind>,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

/// Training config file. Every field is optional; `config.json` in a run
/// directory is the fully resolved form.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub task: Option<Task>,
    pub variant: Option<VariantKind>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    /// Network hyper-parameters; `input_dim` follows the variant.
    pub mlp: Option<MlpConfig>,
    pub head: Option<Head>,
    /// One stopping rule per class, or one shared by all. Defaults to the
    /// reference thresholds of the task and variant.
    pub early_stop: Option<Vec<EarlyStopSpec>>,
    pub input: DataSource,
}

pub const CONFIG_FILE: &str = "config.json";
pub const REPORTS_FILE: &str = "reports.json";
pub const CHECKPOINT_DIR: &str = "checkpoint";

fn resolve(args: &TrainArgs) -> Result<TrainConfig, CliError> {
    let file: TrainConfig = match &args.config {
        Some(p) => read_json(p)?,
        None => TrainConfig::default(),
    };
    let task = args.task.or(file.task).unwrap_or(Task::Phoneme);
    let variant = args.variant.or(file.variant).unwrap_or(VariantKind::Ss3);
    let mut mlp = file.mlp.unwrap_or_default();
    mlp.input_dim = variant.dim();
    mlp.validate().map_err(CliError::usage)?;
    let early_stop = file
        .early_stop
        .unwrap_or_else(|| EarlyStopSpec::reference(task, variant));
    for s in &early_stop {
        s.validate().map_err(CliError::usage)?;
    }
    if early_stop.len() != 1 && early_stop.len() != task.n_classes() {
        return Err(CliError::usage(format!(
            "early_stop has {} entries; expected 1 or {}",
            early_stop.len(),
            task.n_classes()
        )));
    }
    Ok(TrainConfig {
        task: Some(task),
        variant: Some(variant),
        seed: Some(resolve_seed(args.seed, file.seed)?),
        jobs: Some(resolve_jobs(args.jobs, file.jobs)?),
        mlp: Some(mlp),
        head: Some(args.head.map(HeadKind::head).or(file.head).unwrap_or_default()),
        early_stop: Some(early_stop),
        input: file.input.merged(&args.source),
    })
}

fn stop_name(r: StopReason) -> &'static str {
    match r {
        StopReason::Converged => "converged",
        StopReason::MaxBatchSets => "max-batch-sets",
        StopReason::WallClock => "wall-clock",
        StopReason::Failed => "FAILED",
    }
}

fn print_summary(ensemble: &OconEnsemble, reports: &[TrainReport]) {
    say!("class,name,stop,batch_sets,epochs,final_loss,test_accuracy,seconds");
    for r in reports {
        say!(
            "{},{},{},{},{},{:.4},{:.4},{:.1}",
            r.class,
            ensemble.class_names[r.class],
            stop_name(r.stop_reason),
            r.batch_sets,
            r.epochs,
            r.final_loss,
            r.test_accuracy,
            r.wall_seconds
        );
    }
}

pub fn run(args: &TrainArgs) -> Result<RunInfo, CliError> {
    let cfg = resolve(args)?;
    let (task, variant, seed, jobs) = (cfg.task.unwrap(), cfg.variant.unwrap(), cfg.seed.unwrap(), cfg.jobs.unwrap());
    let mlp = cfg.mlp.clone().unwrap();
    let specs = cfg.early_stop.clone().unwrap();

    let raw = cfg.input.matrix(variant, seed)?;
    let matrix = match raw.scaling {
        Some(_) => raw,
        None => min_max_fit_transform(&raw).map_err(core)?.0,
    };
    let mut ensemble = OconEnsemble::new(task, &mlp, seed).map_err(core)?;
    ensemble.head = cfg.head.unwrap();
    eprintln!(
        "training {} {} nets on {} rows of {} with {jobs} job(s), seed {seed}",
        ensemble.n_classes(),
        task.class_names().join("/"),
        matrix.rows,
        variant.name()
    );
    let reports = train_ensemble(&mut ensemble, &matrix, &specs, seed, jobs).map_err(core)?;

    let out = &args.out;
    let config_value = serde_json::to_value(&cfg).map_err(CliError::data)?;
    let mut manifest = RunManifest::new("train", Some(seed), config_value);
    cfg.input.record_inputs(&mut manifest)?;
    if let Some(p) = &args.config {
        manifest.input(p)?;
    }
    write_json(&out.join(CONFIG_FILE), &cfg)?;
    manifest.output(&out.join(CONFIG_FILE))?;

    let ckpt_dir = out.join(CHECKPOINT_DIR);
    let ckpt = Checkpoint {
        ensemble,
        variant,
        scaling: matrix.scaling.clone(),
    };
    ckpt.save(&ckpt_dir).map_err(core)?;
    for f in checkpoint_files(&ckpt_dir, ckpt.ensemble.n_classes()) {
        manifest.output(&f)?;
    }
    write_curves(out, &reports)?;
    write_json(&out.join(REPORTS_FILE), &reports)?;
    manifest.write(out)?;

    print_summary(&ckpt.ensemble, &reports);
    let failed: Vec<String> = reports
        .iter()
        .filter(|r| r.stop_reason == StopReason::Failed)
        .map(|r| format!("class {} ({})", r.class, r.error.as_deref().unwrap_or("unknown error")))
        .collect();
    if !failed.is_empty() {
        return Err(CliError::training(format!("training failed for {}", failed.join(", "))));
    }
    Ok(RunInfo {
        out: Some(out.clone()),
        checkpoint: Some(ckpt_dir),
    })
}

fn write_curves(out: &Path, reports: &[TrainReport]) -> Result<(), CliError> {
    let dir = out.join("curves");
    std::fs::create_dir_all(&dir).map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?;
    for r in reports {
        r.write_curve_csv(dir.join(format!("class_{:02}.csv", r.class))).map_err(core)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args() -> TrainArgs {
        TrainArgs {
            source: DataSource {
                synthetic: true,
                ..DataSource::default()
            },
            variant: None,
            task: None,
            config: None,
            seed: Some(5),
            jobs: Some(1),
            head: None,
            out: PathBuf::from("unused"),
        }
    }

    #[test]
    fn defaults_are_the_reference_architecture() {
        let cfg = resolve(&args()).unwrap();
        let mlp = cfg.mlp.unwrap();
        assert_eq!(mlp, MlpConfig::with_input_dim(3));
        assert_eq!(mlp.hidden_layers, vec![100]);
        assert_eq!((mlp.keep_input, mlp.keep_hidden, mlp.lr, mlp.l2_lambda), (0.8, 0.5, 1e-4, 1e-4));
        assert!(mlp.batch_norm);
        assert_eq!(cfg.head, Some(Head::ArgMax));
        assert_eq!(cfg.early_stop.unwrap(), EarlyStopSpec::reference(Task::Phoneme, VariantKind::Ss3));
    }

    #[test]
    fn speaker_task_uses_per_class_thresholds() {
        let mut a = args();
        a.task = Some(Task::Speaker);
        let specs = resolve(&a).unwrap().early_stop.unwrap();
        let t: Vec<(f64, f64)> = specs.iter().map(|s| (s.loss_threshold, s.accuracy_threshold)).collect();
        assert_eq!(t, [(0.36, 0.80), (0.08, 0.97), (0.45, 0.80)]);
    }

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"seed": 9, "variant": "tt12", "mlp": {"lr": 0.001}}"#).unwrap();
        let mut a = args();
        a.config = Some(p);
        let cfg = resolve(&a).unwrap();
        assert_eq!(cfg.seed, Some(5));
        assert_eq!(cfg.variant, Some(VariantKind::Tt12));
        let mlp = cfg.mlp.unwrap();
        assert_eq!((mlp.lr, mlp.input_dim, mlp.keep_hidden), (1e-3, 12, 0.5));
    }

    #[test]
    fn unknown_config_keys_are_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"learning_rate": 0.1}"#).unwrap();
        let mut a = args();
        a.config = Some(p);
        assert_eq!(resolve(&a).unwrap_err().code, crate::error::EXIT_USAGE);
    }
}
