use std::path::PathBuf;

use clap::Args;
use ocon_core::dataset::{class_stats, to_table};
use ocon_core::features::{build_variant, save_container, VariantKind};

use super::{resolve_seed, RunInfo};
use crate::data::DataSource;
use crate::error::{core, CliError};
use crate::manifest::{write_text, RunManifest};

/// Reads a formant table (or generates one), drops records with failed
/// measurements, and writes the records, class statistics and one feature
/// container per variant.
#[derive(Debug, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub source: DataSource,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Seed for `--synthetic`.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn run(args: &IngestArgs) -> Result<RunInfo, CliError> {
    if args.source.container.is_some() {
        return Err(CliError::usage("ingest reads a table; use --data or --synthetic"));
    }
    let seed = resolve_seed(args.seed, None)?;
    let (records, rejected) = args.source.records(seed)?;
    let out = &args.out;
    let mut manifest = RunManifest::new("ingest", Some(seed), serde_json::to_value(&args.source).map_err(CliError::data)?);
    args.source.record_inputs(&mut manifest)?;

    let stats = class_stats(&records);
    let files = [
        ("records.csv", to_table(&records)),
        ("rejected.csv", to_table(&rejected)),
        ("stats.csv", stats.to_csv()),
    ];
    for (name, text) in &files {
        let p = out.join(name);
        write_text(&p, text)?;
        manifest.output(&p)?;
    }
    for v in VariantKind::ALL {
        let p = out.join("features").join(format!("{}.ocfs", v.name()));
        let m = build_variant(&records, v).map_err(core)?;
        std::fs::create_dir_all(p.parent().unwrap()).map_err(|e| CliError::data(format!("{}: {e}", out.display())))?;
        save_container(&m, &p).map_err(core)?;
        manifest.output(&p)?;
    }
    manifest.write(out)?;

    say!("{}", stats.to_csv().trim_end());
    eprintln!("kept {} records, rejected {}; wrote {}", records.len(), rejected.len(), out.display());
    Ok(RunInfo {
        out: Some(out.clone()),
        checkpoint: None,
    })
}
