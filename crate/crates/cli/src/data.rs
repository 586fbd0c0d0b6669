//! Where records and feature matrices come from.

use std::path::{Path, PathBuf};

use clap::Args;
use ocon_core::dataset::{filter_nulls, ingest_str, ColumnMap, FeatureRecord};
use ocon_core::features::{build_variant, load_container, FeatureMatrix, VariantKind};
use ocon_core::synthetic::{generate, SyntheticSpec};
use serde::{Deserialize, Serialize};

use crate::error::{core, CliError};
use crate::manifest::RunManifest;

/// Exactly one of `data`, `container` or `synthetic` selects the input.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSource {
    /// Formant table, comma or whitespace delimited.
    #[arg(long, value_name = "PATH")]
    pub data: Option<PathBuf>,
    /// Column map: a JSON file, `default` (named header) or `hgcw-bigdata`
    /// (positional). Detected from the table when omitted.
    #[arg(long, value_name = "PATH|PRESET")]
    pub column_map: Option<String>,
    /// Feature container written by `ocon ingest`.
    #[arg(long, value_name = "PATH")]
    pub container: Option<PathBuf>,
    /// Generate a synthetic table from the run seed.
    #[arg(long)]
    pub synthetic: bool,
}

impl DataSource {
    /// `self` with any field set in `over` replaced.
    pub fn merged(&self, over: &DataSource) -> DataSource {
        let base = if over.data.is_some() || over.container.is_some() || over.synthetic {
            over
        } else {
            self
        };
        DataSource {
            column_map: over.column_map.clone().or_else(|| self.column_map.clone()),
            ..base.clone()
        }
    }

    fn check(&self) -> Result<(), CliError> {
        let n = usize::from(self.data.is_some()) + usize::from(self.container.is_some()) + usize::from(self.synthetic);
        match n {
            1 => Ok(()),
            0 => Err(CliError::usage("no input: pass --data, --container or --synthetic")),
            _ => Err(CliError::usage("--data, --container and --synthetic are mutually exclusive")),
        }
    }

    pub fn record_inputs(&self, manifest: &mut RunManifest) -> Result<(), CliError> {
        for p in [&self.data, &self.container].into_iter().flatten() {
            manifest.input(p)?;
        }
        if let Some(m) = &self.column_map {
            if Path::new(m).is_file() {
                manifest.input(Path::new(m))?;
            }
        }
        Ok(())
    }

    /// Null-filtered records and the rejected ones. Not available for
    /// containers.
    pub fn records(&self, seed: u64) -> Result<(Vec<FeatureRecord>, Vec<FeatureRecord>), CliError> {
        self.check()?;
        if self.synthetic {
            return Ok(filter_nulls(generate(&SyntheticSpec::with_seed(seed))));
        }
        let Some(path) = &self.data else {
            return Err(CliError::usage("this command needs --data or --synthetic"));
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        let map = self.column_map(&text)?;
        let records = ingest_str(&text, &map).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        Ok(filter_nulls(records))
    }

    fn column_map(&self, text: &str) -> Result<ColumnMap, CliError> {
        match self.column_map.as_deref() {
            None => Ok(ColumnMap::detect(text)),
            Some("default") => Ok(ColumnMap::default()),
            Some("hgcw-bigdata") => Ok(ColumnMap::hgcw_bigdata()),
            Some(path) => {
                let json = std::fs::read_to_string(path).map_err(|e| CliError::data(format!("column map {path}: {e}")))?;
                ColumnMap::from_json(&json).map_err(|e| CliError::data(format!("column map {path}: {e}")))
            }
        }
    }

    /// Unscaled matrix of `variant`, or the container as stored.
    pub fn matrix(&self, variant: VariantKind, seed: u64) -> Result<FeatureMatrix, CliError> {
        self.check()?;
        if let Some(path) = &self.container {
            let m = load_container(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
            if m.variant != variant {
                return Err(CliError::usage(format!(
                    "{} holds variant {}, not {}",
                    path.display(),
                    m.variant.name(),
                    variant.name()
                )));
            }
            return Ok(m);
        }
        let (records, _) = self.records(seed)?;
        build_variant(&records, variant).map_err(core)
    }
}
