//! Ensemble checkpoints: a directory holding `manifest.json` and one
//! `class_XX.ocfs` parameter container per class.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::features::{ScalingParams, Task, VariantKind};
use crate::neural::{MlpConfig, OneClassNet};
use crate::ocon::{Head, OconEnsemble};
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleManifest {
    pub format: String,
    pub task: Task,
    pub class_names: Vec<String>,
    pub head: Head,
    pub master_seed: u64,
    pub variant: VariantKind,
    /// Min-max parameters to apply to raw feature rows before inference.
    pub scaling: Option<ScalingParams>,
    pub config: MlpConfig,
    pub files: Vec<String>,
}

pub fn class_file(class: usize) -> String {
    format!("class_{class:02}.ocfs")
}

/// A trained ensemble plus what is needed to feed it raw features.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub ensemble: OconEnsemble,
    pub variant: VariantKind,
    pub scaling: Option<ScalingParams>,
}

impl Checkpoint {
    pub fn manifest(&self) -> EnsembleManifest {
        let e = &self.ensemble;
        EnsembleManifest {
            format: "ocon-ensemble/1".into(),
            task: e.task,
            class_names: e.class_names.clone(),
            head: e.head,
            master_seed: e.master_seed,
            variant: self.variant,
            scaling: self.scaling.clone(),
            config: e.nets.first().map(|n| n.config().clone()).unwrap_or_default(),
            files: (0..e.n_classes()).map(class_file).collect(),
        }
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let manifest = self.manifest();
        for (net, file) in self.ensemble.nets.iter().zip(&manifest.files) {
            net.to_container().save(dir.join(file))?;
        }
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest)?;
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: EnsembleManifest = serde_json::from_str(&text)?;
        if m.files.len() != m.class_names.len() {
            return Err(Error::Checkpoint(format!(
                "{} class files for {} classes",
                m.files.len(),
                m.class_names.len()
            )));
        }
        let nets = m
            .files
            .iter()
            .map(|f| {
                let c = crate::container::Container::load(dir.join(f))?;
                Ok(OneClassNet::from_container(&c)?)
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = nets.first() {
            let dim = first.input_dim();
            if nets.iter().any(|n| n.input_dim() != dim) {
                return Err(Error::Checkpoint("class nets disagree on input width".into()));
            }
        }
        Ok(Checkpoint {
            ensemble: OconEnsemble {
                task: m.task,
                class_names: m.class_names,
                nets,
                head: m.head,
                master_seed: m.master_seed,
            },
            variant: m.variant,
            scaling: m.scaling,
        })
    }

    /// Scales a raw variant row with the stored parameters, then infers.
    pub fn infer_raw(&self, raw: &[f64]) -> Result<(Vec<f64>, usize)> {
        let mut row = raw.to_vec();
        if let Some(s) = &self.scaling {
            if s.cols() != row.len() {
                return Err(crate::ocon::OconError::DimensionMismatch {
                    expected: s.cols(),
                    got: row.len(),
                }
                .into());
            }
            s.scale_row(&mut row);
        }
        Ok(self.ensemble.infer(&row)?)
    }
}

/// Paths of every file a checkpoint directory consists of.
pub fn checkpoint_files(dir: impl AsRef<Path>, n_classes: usize) -> Vec<PathBuf> {
    let dir = dir.as_ref();
    let mut v: Vec<PathBuf> = (0..n_classes).map(|c| dir.join(class_file(c))).collect();
    v.push(dir.join(MANIFEST_FILE));
    v
}
