use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use ocon_core::checkpoint::Checkpoint;

use super::RunInfo;
use crate::error::{core, CliError};
use crate::manifest::{write_text, RunManifest};

/// Classifies raw feature rows, printing the class probabilities and the
/// decided label for each.
#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long, value_name = "DIR")]
    pub checkpoint: PathBuf,
    /// CSV of unscaled variant features, one row per input; a non-numeric
    /// first row is taken as a header.
    #[arg(long, value_name = "CSV")]
    pub features: PathBuf,
    /// Also write `predictions.csv` and a run manifest here.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

fn read_rows(path: &Path, dim: usize) -> Result<Vec<Vec<f64>>, CliError> {
    let err = |m: String| CliError::data(format!("{}: {m}", path.display()));
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| err(e.to_string()))?;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| err(e.to_string()))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(v) => v,
            Err(_) if i == 0 => continue,
            Err(_) => return Err(err(format!("row {i}: non-numeric value"))),
        };
        if row.len() != dim {
            return Err(err(format!("row {i}: {} values, the checkpoint expects {dim}", row.len())));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn run(args: &InferArgs) -> Result<RunInfo, CliError> {
    let ckpt = Checkpoint::load(&args.checkpoint).map_err(core)?;
    let rows = read_rows(&args.features, ckpt.variant.dim())?;
    let names = &ckpt.ensemble.class_names;
    let mut text = String::from("row,label_id,label");
    for n in names {
        let _ = write!(text, ",p_{n}");
    }
    text.push('\n');
    for (i, row) in rows.iter().enumerate() {
        let (p, label) = ckpt.infer_raw(row).map_err(core)?;
        let _ = write!(text, "{i},{label},{}", names[label]);
        for x in p {
            let _ = write!(text, ",{x:.6}");
        }
        text.push('\n');
    }
    say!("{}", text.trim_end());
    if let Some(out) = &args.out {
        let mut manifest = RunManifest::new(
            "infer",
            None,
            serde_json::json!({ "checkpoint": args.checkpoint, "features": args.features }),
        );
        manifest.input(&args.features)?;
        manifest.input(&args.checkpoint.join(ocon_core::checkpoint::MANIFEST_FILE))?;
        write_text(&out.join("predictions.csv"), &text)?;
        manifest.output(&out.join("predictions.csv"))?;
        manifest.write(out)?;
    }
    Ok(RunInfo {
        out: args.out.clone(),
        checkpoint: Some(args.checkpoint.clone()),
    })
}
