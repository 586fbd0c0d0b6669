use std::path::PathBuf;

use clap::Args;
use ocon_core::checkpoint::Checkpoint;
use ocon_core::metrics::evaluate_ensemble;
use ocon_core::report::{accuracy_table_csv, det_svg, roc_det_table_csv, roc_svg};

use super::{resolve_seed, RunInfo};
use crate::data::DataSource;
use crate::error::{core, CliError};
use crate::manifest::{write_json, write_text, RunManifest};

/// Evaluates a checkpoint: per-class accuracy metrics, AUC and error rates
/// as CSV, and ROC / DET plots as SVG.
#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub source: DataSource,
    #[arg(long, value_name = "DIR")]
    pub checkpoint: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Seed for `--synthetic`.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn run(args: &EvalArgs) -> Result<RunInfo, CliError> {
    let seed = resolve_seed(args.seed, None)?;
    let ckpt = Checkpoint::load(&args.checkpoint).map_err(core)?;
    let raw = args.source.matrix(ckpt.variant, seed)?;
    let matrix = match (&raw.scaling, &ckpt.scaling) {
        (None, Some(s)) => s.transform(&raw).map_err(core)?,
        (a, b) if a == b => raw,
        _ => return Err(CliError::data("container scaling differs from the checkpoint's")),
    };
    let eval = evaluate_ensemble(&ckpt.ensemble, &matrix).map_err(core)?;

    let out = &args.out;
    let mut manifest = RunManifest::new(
        "eval",
        Some(seed),
        serde_json::json!({ "checkpoint": args.checkpoint, "input": args.source }),
    );
    args.source.record_inputs(&mut manifest)?;
    manifest.input(&args.checkpoint.join(ocon_core::checkpoint::MANIFEST_FILE))?;
    let accuracy = accuracy_table_csv(&eval);
    for (name, text) in [
        ("accuracy.csv", accuracy.clone()),
        ("roc_det.csv", roc_det_table_csv(&eval)),
        ("roc.svg", roc_svg(&eval)),
        ("det.svg", det_svg(&eval)),
    ] {
        write_text(&out.join(name), &text)?;
        manifest.output(&out.join(name))?;
    }
    write_json(&out.join("evaluation.json"), &eval)?;
    manifest.output(&out.join("evaluation.json"))?;
    manifest.write(out)?;

    say!("{}", accuracy.trim_end());
    eprintln!(
        "{} rows; mean class accuracy {:.4}, OCON accuracy {:.4}",
        matrix.rows,
        eval.mean_class_accuracy(),
        eval.ocon_accuracy
    );
    Ok(RunInfo {
        out: Some(out.clone()),
        checkpoint: Some(args.checkpoint.clone()),
    })
}
