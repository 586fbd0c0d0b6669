use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};

use clap::{Args, ValueEnum};
use ocon_core::features::min_max_fit_transform;
use ocon_core::search::{reference_stages, run_pipeline, write_csv, GridStage, StageOutcome};
use serde::{Deserialize, Serialize};

use super::{read_json, resolve_jobs, resolve_seed, RunInfo};
use crate::data::DataSource;
use crate::error::{core, CliError};
use crate::manifest::{write_json, RunManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    All,
    Architecture,
    Dropout,
    BatchNorm,
    L2,
}

/// Runs grid-search stages in order, each inheriting the previous winner.
#[derive(Debug, Args)]
pub struct SearchArgs {
    #[command(flatten)]
    pub source: DataSource,
    /// Stage spec (one stage or a JSON array of stages); repeatable.
    #[arg(long = "stage", value_name = "FILE")]
    pub stages: Vec<PathBuf>,
    /// Built-in stages, used when no --stage is given.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Same stages with 50 epochs and 2 folds.
    #[arg(long)]
    pub smoke: bool,
    /// Report the planned cycles and exit.
    #[arg(long)]
    pub dry_run: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, value_name = "DIR", required_unless_present = "dry_run")]
    pub out: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum StageFile {
    One(GridStage),
    Many(Vec<GridStage>),
}

#[derive(Serialize)]
struct Winner<'a> {
    stage: &'a str,
    best: String,
    mean_acc: f64,
    inherited: &'a std::collections::BTreeMap<String, ocon_core::search::HpValue>,
}

fn stages(args: &SearchArgs) -> Result<Vec<GridStage>, CliError> {
    let mut out = Vec::new();
    for p in &args.stages {
        match read_json::<StageFile>(p)? {
            StageFile::One(s) => out.push(s),
            StageFile::Many(v) => out.extend(v),
        }
    }
    if out.is_empty() {
        let all = reference_stages();
        out = match args.preset.unwrap_or(Preset::All) {
            Preset::All => all,
            Preset::Architecture => vec![all[0].clone()],
            Preset::Dropout => vec![all[1].clone()],
            Preset::BatchNorm => vec![all[2].clone()],
            Preset::L2 => vec![all[3].clone()],
        };
    } else if args.preset.is_some() {
        return Err(CliError::usage("--preset and --stage are mutually exclusive"));
    }
    if args.smoke {
        out = out.iter().map(GridStage::smoke).collect();
    }
    for s in &out {
        s.validate().map_err(|e| CliError::usage(e.to_string()))?;
        if (s.task, s.variant) != (out[0].task, out[0].variant) {
            return Err(CliError::usage(format!(
                "stage {} uses a different task or variant than stage {}",
                s.name, out[0].name
            )));
        }
    }
    Ok(out)
}

pub fn run(args: &SearchArgs) -> Result<RunInfo, CliError> {
    let stages = stages(args)?;
    let mut total = 0;
    for s in &stages {
        let combos = s.enumerate().map_err(core)?.len();
        let cycles = s.cycles().map_err(core)?;
        total += cycles;
        say!(
            "stage {}: {combos} combinations x {} classes x {} folds = {cycles} planned cycles ({} epochs each)",
            s.name,
            s.classes.len(),
            s.folds,
            s.epochs
        );
    }
    say!("total: {total} planned cycles");
    let Some(out) = args.out.as_ref().filter(|_| !args.dry_run) else {
        return Ok(RunInfo::default());
    };

    let seed = resolve_seed(args.seed, None)?;
    let jobs = resolve_jobs(args.jobs, None)?;
    let (task, variant) = (stages[0].task, stages[0].variant);
    let raw = args.source.matrix(variant, seed)?;
    let matrix = match raw.scaling {
        Some(_) => raw,
        None => min_max_fit_transform(&raw).map_err(core)?.0,
    };

    let done = AtomicUsize::new(0);
    let outcomes = run_pipeline(&stages, &matrix, seed, jobs, |stage, o: &StageOutcome| {
        let n = done.fetch_add(1, Ordering::Relaxed) + 1;
        eprintln!(
            "[{n}/{}] {}: best {} (mean acc {:.4})",
            stages.len(),
            stage.name,
            o.best,
            o.ranked.first().map(|t| t.mean_acc).unwrap_or(0.0)
        );
    })
    .map_err(core)?;

    let mut manifest = RunManifest::new(
        "search",
        Some(seed),
        serde_json::json!({ "stages": stages, "input": args.source, "jobs": jobs }),
    );
    args.source.record_inputs(&mut manifest)?;
    for p in &args.stages {
        manifest.input(p)?;
    }
    write_json(&out.join("stages.json"), &stages)?;
    let class_names = task.class_names();
    for (i, o) in outcomes.iter().enumerate() {
        let names: Vec<String> = o.classes.iter().map(|&c| class_names[c].clone()).collect();
        write_csv(o, &names, out.join(format!("{}_{}.csv", i + 1, o.stage))).map_err(core)?;
    }
    write_json(&out.join("outcomes.json"), &outcomes)?;
    let winners: Vec<Winner> = outcomes
        .iter()
        .map(|o| Winner {
            stage: &o.stage,
            best: o.best.to_string(),
            mean_acc: o.ranked.first().map(|t| t.mean_acc).unwrap_or(0.0),
            inherited: &o.inherited,
        })
        .collect();
    write_json(&out.join("winners.json"), &winners)?;
    manifest.output(&out.join("winners.json"))?;
    manifest.write(out)?;
    for w in &winners {
        say!("winner {}: {} (mean acc {:.4})", w.stage, w.best, w.mean_acc);
    }
    Ok(RunInfo {
        out: Some(out.clone()),
        checkpoint: None,
    })
}
