//! Feature construction: formant/F0 ratios, dataset variants, min-max
//! scaling, probability-mass histograms, and OCFS1 persistence.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::container::{Container, ContainerError, Section};
use crate::dataset::{FeatureRecord, PhonemeClass, SamplePoint, SpeakerGroup};

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("non-positive input (formant {formant} Hz, f0 {f0} Hz){}", record_suffix(.record))]
    NonPositiveInput {
        formant: f64,
        f0: f64,
        record: Option<String>,
    },
    #[error("empty column")]
    EmptyColumn,
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("bin count must be at least 1")]
    NoBins,
    #[error("unknown variant {0:?} (expected ss3, ss3-f0, tt12 or tt12-f0)")]
    UnknownVariant(String),
    #[error("scaling has {params} columns, matrix has {cols}")]
    ScalingMismatch { params: usize, cols: usize },
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error("bad feature-matrix metadata: {0}")]
    BadMetadata(String),
}

fn record_suffix(record: &Option<String>) -> String {
    record.as_ref().map(|r| format!(" in record {r}")).unwrap_or_default()
}

/// Linear formant normalisation: `f_i / f0`.
pub fn formant_ratio(formant: f64, f0: f64) -> Result<f64, FeatureError> {
    if !(formant > 0.0) || !(f0 > 0.0) {
        return Err(FeatureError::NonPositiveInput {
            formant,
            f0,
            record: None,
        });
    }
    Ok(formant / f0)
}

/// Dataset sub-structures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantKind {
    /// F1..F3 / F0 at the steady state.
    Ss3,
    /// `Ss3` plus F0.
    Ss3F0,
    /// F1..F3 / F0 at 10%, 50%, SS and 80%.
    Tt12,
    /// `Tt12` plus F0.
    Tt12F0,
}

impl VariantKind {
    pub const ALL: [VariantKind; 4] = [Self::Ss3, Self::Ss3F0, Self::Tt12, Self::Tt12F0];

    pub fn dim(self) -> usize {
        match self {
            Self::Ss3 => 3,
            Self::Ss3F0 => 4,
            Self::Tt12 => 12,
            Self::Tt12F0 => 13,
        }
    }

    pub fn has_f0(self) -> bool {
        matches!(self, Self::Ss3F0 | Self::Tt12F0)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Ss3 => "ss3",
            Self::Ss3F0 => "ss3-f0",
            Self::Tt12 => "tt12",
            Self::Tt12F0 => "tt12-f0",
        }
    }

    fn points(self) -> &'static [SamplePoint] {
        match self {
            Self::Ss3 | Self::Ss3F0 => &[SamplePoint::SteadyState],
            Self::Tt12 | Self::Tt12F0 => &SamplePoint::ALL,
        }
    }

    /// Column names in matrix order. Formant-major: for the time-track
    /// variants, `f1/f0@10, f1/f0@50, f1/f0@ss, f1/f0@80, f2/f0@10, ...`.
    /// F0 (when present) is last.
    pub fn column_names(self) -> Vec<String> {
        let mut cols = Vec::with_capacity(self.dim());
        for f in 1..=3 {
            for p in self.points() {
                cols.push(format!("f{f}/f0@{}", p.tag()));
            }
        }
        if self.has_f0() {
            cols.push("f0".into());
        }
        cols
    }
}

impl fmt::Display for VariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VariantKind {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s.to_ascii_lowercase())
            .ok_or_else(|| FeatureError::UnknownVariant(s.to_string()))
    }
}

/// Per-column `(min, max)` recorded by [`min_max_fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl ScalingParams {
    pub fn cols(&self) -> usize {
        self.mins.len()
    }

    /// `(x - min) / (max - min)`; constant columns map to 0.
    pub fn scale_value(&self, col: usize, x: f64) -> f64 {
        let (lo, hi) = (self.mins[col], self.maxs[col]);
        if hi > lo {
            (x - lo) / (hi - lo)
        } else {
            0.0
        }
    }

    pub fn scale_row(&self, row: &mut [f64]) {
        for (j, x) in row.iter_mut().enumerate() {
            *x = self.scale_value(j, *x);
        }
    }

    /// Replays the scaling on `matrix` (which must be unscaled).
    pub fn transform(&self, matrix: &FeatureMatrix) -> Result<FeatureMatrix, FeatureError> {
        if self.cols() != matrix.cols {
            return Err(FeatureError::ScalingMismatch {
                params: self.cols(),
                cols: matrix.cols,
            });
        }
        let mut out = matrix.clone();
        for row in out.values.chunks_exact_mut(out.cols) {
            self.scale_row(row);
        }
        out.scaling = Some(self.clone());
        Ok(out)
    }
}

/// Row-major feature table with per-row labels and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
    pub variant: VariantKind,
    pub names: Vec<String>,
    pub phonemes: Vec<PhonemeClass>,
    pub groups: Vec<SpeakerGroup>,
    /// Present once the matrix has been min-max scaled.
    pub scaling: Option<ScalingParams>,
}

/// Which label set a classifier bank is trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Phoneme,
    Speaker,
}

impl Task {
    pub fn n_classes(self) -> usize {
        match self {
            Task::Phoneme => 12,
            Task::Speaker => 3,
        }
    }

    pub fn class_names(self) -> Vec<String> {
        match self {
            Task::Phoneme => PhonemeClass::ALL.iter().map(|p| p.arpabet().to_string()).collect(),
            Task::Speaker => crate::dataset::SpeakerClass::ALL
                .iter()
                .map(|c| c.name().to_string())
                .collect(),
        }
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "phoneme" => Ok(Task::Phoneme),
            "speaker" => Ok(Task::Speaker),
            other => Err(format!("unknown task {other:?} (expected phoneme or speaker)")),
        }
    }
}

impl FeatureMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.values[i * self.cols + j]).collect()
    }

    /// Class ids for `task`: phoneme label ids, or children/men/women.
    pub fn labels(&self, task: Task) -> Vec<usize> {
        match task {
            Task::Phoneme => self.phonemes.iter().map(|p| p.label_id()).collect(),
            Task::Speaker => self.groups.iter().map(|g| g.speaker_class().id()).collect(),
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let mut values = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        FeatureMatrix {
            rows: rows.len(),
            cols: self.cols,
            values,
            variant: self.variant,
            names: rows.iter().map(|&r| self.names[r].clone()).collect(),
            phonemes: rows.iter().map(|&r| self.phonemes[r]).collect(),
            groups: rows.iter().map(|&r| self.groups[r]).collect(),
            scaling: self.scaling.clone(),
        }
    }

    pub fn to_container(&self) -> Container {
        let meta = json!({
            "kind": "feature_matrix",
            "variant": self.variant,
            "rows": self.rows,
            "cols": self.cols,
            "columns": self.variant.column_names(),
            "names": self.names,
            "phonemes": self.phonemes.iter().map(|p| p.arpabet()).collect::<Vec<_>>(),
            "groups": self.groups.iter().map(|g| g.code().to_string()).collect::<Vec<_>>(),
            "scaled": self.scaling.is_some(),
        });
        let mut c = Container::new(meta);
        c.push(Section::new("values", vec![self.rows, self.cols], self.values.clone()));
        if let Some(s) = &self.scaling {
            c.push(Section::vector("scale_min", s.mins.clone()));
            c.push(Section::vector("scale_max", s.maxs.clone()));
        }
        c
    }

    pub fn from_container(c: &Container) -> Result<Self, FeatureError> {
        let bad = |m: &str| FeatureError::BadMetadata(m.to_string());
        let meta = &c.metadata;
        if meta["kind"] != "feature_matrix" {
            return Err(bad("kind is not feature_matrix"));
        }
        let variant: VariantKind =
            serde_json::from_value(meta["variant"].clone()).map_err(|e| bad(&e.to_string()))?;
        let strings = |key: &str| -> Result<Vec<String>, FeatureError> {
            serde_json::from_value(meta[key].clone()).map_err(|e| bad(&format!("{key}: {e}")))
        };
        let names = strings("names")?;
        let phonemes = strings("phonemes")?
            .iter()
            .map(|s| PhonemeClass::from_arpabet(s).ok_or_else(|| bad(&format!("phoneme {s:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let groups = strings("groups")?
            .iter()
            .map(|s| {
                s.chars()
                    .next()
                    .and_then(SpeakerGroup::from_code)
                    .ok_or_else(|| bad(&format!("group {s:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let values = c.section("values")?;
        let [rows, cols] = values.shape[..] else {
            return Err(bad("values must be 2-D"));
        };
        if cols != variant.dim() || names.len() != rows || phonemes.len() != rows || groups.len() != rows {
            return Err(bad("row/column counts disagree"));
        }
        let scaling = if meta["scaled"] == true {
            Some(ScalingParams {
                mins: c.section("scale_min")?.data.clone(),
                maxs: c.section("scale_max")?.data.clone(),
            })
        } else {
            None
        };
        Ok(FeatureMatrix {
            rows,
            cols,
            values: values.data.clone(),
            variant,
            names,
            phonemes,
            groups,
            scaling,
        })
    }
}

/// Builds the unscaled matrix for `kind`. F0 (when present) is raw Hz.
pub fn build_variant(records: &[FeatureRecord], kind: VariantKind) -> Result<FeatureMatrix, FeatureError> {
    let cols = kind.dim();
    let mut values = Vec::with_capacity(records.len() * cols);
    for r in records {
        for f in 1..=3 {
            for &p in kind.points() {
                let ratio = formant_ratio(r.formant(f, p), r.f0_ss).map_err(|e| match e {
                    FeatureError::NonPositiveInput { formant, f0, .. } => FeatureError::NonPositiveInput {
                        formant,
                        f0,
                        record: Some(r.name.clone()),
                    },
                    other => other,
                })?;
                values.push(ratio);
            }
        }
        if kind.has_f0() {
            values.push(r.f0_ss);
        }
    }
    Ok(FeatureMatrix {
        rows: records.len(),
        cols,
        values,
        variant: kind,
        names: records.iter().map(|r| r.name.clone()).collect(),
        phonemes: records.iter().map(|r| r.phoneme).collect(),
        groups: records.iter().map(|r| r.group).collect(),
        scaling: None,
    })
}

/// Per-column min/max over `rows` (all rows when `None`).
pub fn min_max_fit(matrix: &FeatureMatrix, rows: Option<&[usize]>) -> Result<ScalingParams, FeatureError> {
    let all: Vec<usize>;
    let rows = match rows {
        Some(r) => r,
        None => {
            all = (0..matrix.rows).collect();
            &all
        }
    };
    if rows.len() < 2 {
        return Err(FeatureError::TooFewRows {
            needed: 2,
            got: rows.len(),
        });
    }
    let mut mins = vec![f64::INFINITY; matrix.cols];
    let mut maxs = vec![f64::NEG_INFINITY; matrix.cols];
    for &i in rows {
        for (j, &x) in matrix.row(i).iter().enumerate() {
            mins[j] = mins[j].min(x);
            maxs[j] = maxs[j].max(x);
        }
    }
    Ok(ScalingParams { mins, maxs })
}

/// Fits min-max on every row and scales the matrix into `[0, 1]`.
pub fn min_max_fit_transform(matrix: &FeatureMatrix) -> Result<(FeatureMatrix, ScalingParams), FeatureError> {
    let params = min_max_fit(matrix, None)?;
    Ok((params.transform(matrix)?, params))
}

/// Per-column mean and (population) standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZScoreParams {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

/// Z-score standardisation. Not part of the default pipeline, which uses
/// min-max scaling because the ratio distributions are skewed.
pub fn zscore_fit_transform(matrix: &FeatureMatrix) -> Result<(FeatureMatrix, ZScoreParams), FeatureError> {
    if matrix.rows < 2 {
        return Err(FeatureError::TooFewRows {
            needed: 2,
            got: matrix.rows,
        });
    }
    let n = matrix.rows as f64;
    let mut means = vec![0.0; matrix.cols];
    let mut stds = vec![0.0; matrix.cols];
    for j in 0..matrix.cols {
        let col = matrix.column(j);
        let m = col.iter().sum::<f64>() / n;
        means[j] = m;
        stds[j] = (col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt();
    }
    let mut out = matrix.clone();
    for row in out.values.chunks_exact_mut(matrix.cols) {
        for (j, x) in row.iter_mut().enumerate() {
            *x = if stds[j] > 0.0 { (*x - means[j]) / stds[j] } else { 0.0 };
        }
    }
    Ok((out, ZScoreParams { means, stds }))
}

/// Equal-width histogram normalised to unit mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `n_bins + 1` edges.
    pub edges: Vec<f64>,
    pub masses: Vec<f64>,
}

/// Probability-mass distribution of `column` over `n_bins` equal-width bins
/// spanning `[min, max]`. The maximum falls in the last bin; a constant
/// column puts all mass in the first.
pub fn pmd(column: &[f64], n_bins: usize) -> Result<Histogram, FeatureError> {
    if column.is_empty() {
        return Err(FeatureError::EmptyColumn);
    }
    if n_bins == 0 {
        return Err(FeatureError::NoBins);
    }
    let lo = column.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / n_bins as f64;
    let edges = (0..=n_bins)
        .map(|i| if i == n_bins { hi } else { lo + width * i as f64 })
        .collect();
    let mut counts = vec![0usize; n_bins];
    for &x in column {
        let bin = if width > 0.0 {
            (((x - lo) / width) as usize).min(n_bins - 1)
        } else {
            0
        };
        counts[bin] += 1;
    }
    let n = column.len() as f64;
    Ok(Histogram {
        edges,
        masses: counts.into_iter().map(|c| c as f64 / n).collect(),
    })
}

pub fn save_container(matrix: &FeatureMatrix, path: impl AsRef<Path>) -> Result<(), FeatureError> {
    Ok(matrix.to_container().save(path)?)
}

pub fn load_container(path: impl AsRef<Path>) -> Result<FeatureMatrix, FeatureError> {
    FeatureMatrix::from_container(&Container::load(path)?)
}
