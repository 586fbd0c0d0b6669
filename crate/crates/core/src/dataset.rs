//! Formant-table ingestion, filename decoding, null filtering, class
//! statistics, and deterministic splits.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;

#[derive(Debug, Error, PartialEq)]
pub enum DatasetError {
    #[error("filename {0:?} is shorter than 5 characters")]
    NameTooShort(String),
    #[error("unknown speaker group character {0:?}")]
    UnknownGroupChar(char),
    #[error("non-numeric speaker id in {0:?}")]
    NonNumericSpeakerId(String),
    #[error("unknown ARPABET code {0:?}")]
    UnknownArpabetCode(String),
    #[error("missing column {0}")]
    MissingColumn(String),
    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("cannot split an empty record set")]
    EmptyInput,
    #[error("invalid split fractions ({0}, {1}, {2})")]
    InvalidSplit(f64, f64, f64),
    #[error("k = {k} is invalid for {n} records")]
    KTooLarge { k: usize, n: usize },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SpeakerGroup {
    Man,
    Woman,
    Boy,
    Girl,
}

impl SpeakerGroup {
    pub const ALL: [SpeakerGroup; 4] = [Self::Man, Self::Woman, Self::Boy, Self::Girl];

    pub fn from_code(c: char) -> Option<Self> {
        match c {
            'm' => Some(Self::Man),
            'w' => Some(Self::Woman),
            'b' => Some(Self::Boy),
            'g' => Some(Self::Girl),
            _ => None,
        }
    }

    pub fn code(self) -> char {
        match self {
            Self::Man => 'm',
            Self::Woman => 'w',
            Self::Boy => 'b',
            Self::Girl => 'g',
        }
    }

    pub fn speaker_class(self) -> SpeakerClass {
        match self {
            Self::Man => SpeakerClass::Men,
            Self::Woman => SpeakerClass::Women,
            Self::Boy | Self::Girl => SpeakerClass::Children,
        }
    }
}

/// Classes of the speaker task. Ids follow the order children, men, women.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SpeakerClass {
    Children,
    Men,
    Women,
}

impl SpeakerClass {
    pub const ALL: [SpeakerClass; 3] = [Self::Children, Self::Men, Self::Women];

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Children => "children",
            Self::Men => "men",
            Self::Women => "women",
        }
    }
}

/// The twelve vowels, in label-id order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PhonemeClass {
    Ae,
    Ah,
    Aw,
    Eh,
    Er,
    Ei,
    Ih,
    Iy,
    Oa,
    Oo,
    Uh,
    Uw,
}

impl PhonemeClass {
    pub const ALL: [PhonemeClass; 12] = [
        Self::Ae,
        Self::Ah,
        Self::Aw,
        Self::Eh,
        Self::Er,
        Self::Ei,
        Self::Ih,
        Self::Iy,
        Self::Oa,
        Self::Oo,
        Self::Uh,
        Self::Uw,
    ];

    pub fn label_id(self) -> usize {
        self as usize
    }

    pub fn from_label_id(id: usize) -> Option<Self> {
        Self::ALL.get(id).copied()
    }

    pub fn arpabet(self) -> &'static str {
        match self {
            Self::Ae => "ae",
            Self::Ah => "ah",
            Self::Aw => "aw",
            Self::Eh => "eh",
            Self::Er => "er",
            Self::Ei => "ei",
            Self::Ih => "ih",
            Self::Iy => "iy",
            Self::Oa => "oa",
            Self::Oo => "oo",
            Self::Uh => "uh",
            Self::Uw => "uw",
        }
    }

    pub fn from_arpabet(code: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|p| p.arpabet() == code)
    }
}

impl fmt::Display for PhonemeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.arpabet())
    }
}

/// Points along the vowel nucleus at which formants are sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SamplePoint {
    At10,
    At50,
    SteadyState,
    At80,
}

impl SamplePoint {
    pub const ALL: [SamplePoint; 4] = [Self::At10, Self::At50, Self::SteadyState, Self::At80];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn tag(self) -> &'static str {
        match self {
            Self::At10 => "10",
            Self::At50 => "50",
            Self::SteadyState => "ss",
            Self::At80 => "80",
        }
    }
}

/// One utterance. `formants[i][p]` is formant `i + 1` at sample point `p`;
/// 0 marks a failed measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub name: String,
    pub group: SpeakerGroup,
    pub speaker_id: u32,
    pub phoneme: PhonemeClass,
    pub f0_ss: f64,
    pub formants: [[f64; 4]; 3],
}

impl FeatureRecord {
    /// `index` is 1-based (F1..F3).
    pub fn formant(&self, index: usize, point: SamplePoint) -> f64 {
        self.formants[index - 1][point.index()]
    }

    pub fn is_complete(&self) -> bool {
        self.f0_ss > 0.0 && self.formants.iter().flatten().all(|&v| v > 0.0)
    }
}

/// Decodes `m10ae`-style names: group, two-digit speaker number, vowel code.
/// Anything after the fifth character (an extension, say) is ignored.
pub fn parse_filename(name: &str) -> Result<(SpeakerGroup, u32, PhonemeClass), DatasetError> {
    let chars: Vec<char> = name.chars().collect();
    if chars.len() < 5 {
        return Err(DatasetError::NameTooShort(name.to_string()));
    }
    let group = SpeakerGroup::from_code(chars[0]).ok_or(DatasetError::UnknownGroupChar(chars[0]))?;
    if !chars[1].is_ascii_digit() || !chars[2].is_ascii_digit() {
        return Err(DatasetError::NonNumericSpeakerId(name.to_string()));
    }
    let speaker_id = chars[1].to_digit(10).unwrap() * 10 + chars[2].to_digit(10).unwrap();
    let code: String = chars[3..5].iter().collect();
    let phoneme =
        PhonemeClass::from_arpabet(&code).ok_or(DatasetError::UnknownArpabetCode(code.clone()))?;
    Ok((group, speaker_id, phoneme))
}

/// A column addressed by header name or by 0-based position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnRef::Index(i) => write!(f, "#{i}"),
            ColumnRef::Name(n) => f.write_str(n),
        }
    }
}

/// Where the filename, F0 and the twelve formant values live in a table.
///
/// Formant columns are listed per formant in sample-point order
/// (10%, 50%, steady state, 80%). The table has a header row when
/// `header` is set; name references require one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub name: ColumnRef,
    pub f0: ColumnRef,
    pub f1: [ColumnRef; 4],
    pub f2: [ColumnRef; 4],
    pub f3: [ColumnRef; 4],
    #[serde(default = "default_true")]
    pub header: bool,
}

fn default_true() -> bool {
    true
}

impl Default for ColumnMap {
    fn default() -> Self {
        let named = |f: usize| {
            SamplePoint::ALL.map(|p| ColumnRef::Name(format!("f{f}_{}", p.tag())))
        };
        ColumnMap {
            name: ColumnRef::Name("file".into()),
            f0: ColumnRef::Name("f0".into()),
            f1: named(1),
            f2: named(2),
            f3: named(3),
            header: true,
        }
    }
}

impl ColumnMap {
    /// Positional layout of the whitespace-delimited "bigdata" style table:
    /// file, duration, F0, F1-F4 at steady state, then F1-F3 at the early,
    /// middle and late sample points.
    pub fn hgcw_bigdata() -> Self {
        let i = ColumnRef::Index;
        ColumnMap {
            name: i(0),
            f0: i(2),
            f1: [i(7), i(10), i(3), i(13)],
            f2: [i(8), i(11), i(4), i(14)],
            f3: [i(9), i(12), i(5), i(15)],
            header: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Named layout if the first data line looks like a header naming
    /// `f0`, otherwise the positional "bigdata" layout.
    pub fn detect(text: &str) -> Self {
        let first = text
            .lines()
            .find(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
            .unwrap_or_default()
            .to_ascii_lowercase();
        let named = first
            .split(|c: char| c == ',' || c.is_whitespace())
            .any(|cell| cell.trim() == "f0");
        if named {
            Self::default()
        } else {
            Self::hgcw_bigdata()
        }
    }

    /// Header names of the default named layout, in file order.
    pub fn default_header() -> Vec<String> {
        let mut cols = vec!["file".to_string(), "f0".to_string()];
        for f in 1..=3 {
            for p in SamplePoint::ALL {
                cols.push(format!("f{f}_{}", p.tag()));
            }
        }
        cols
    }

    fn resolve(&self, header: Option<&[String]>) -> Result<ResolvedColumns, DatasetError> {
        let find = |c: &ColumnRef| -> Result<usize, DatasetError> {
            match c {
                ColumnRef::Index(i) => Ok(*i),
                ColumnRef::Name(n) => header
                    .and_then(|h| h.iter().position(|x| x.trim() == n))
                    .ok_or_else(|| DatasetError::MissingColumn(n.clone())),
            }
        };
        let mut formants = [[0usize; 4]; 3];
        for (fi, cols) in [&self.f1, &self.f2, &self.f3].into_iter().enumerate() {
            for (pi, c) in cols.iter().enumerate() {
                formants[fi][pi] = find(c)?;
            }
        }
        let resolved = ResolvedColumns {
            name: find(&self.name)?,
            f0: find(&self.f0)?,
            formants,
        };
        if let Some(h) = header {
            let width = h.len();
            for (c, idx) in self.all_refs().into_iter().zip(resolved.all()) {
                if idx >= width {
                    return Err(DatasetError::MissingColumn(c.to_string()));
                }
            }
        }
        Ok(resolved)
    }

    fn all_refs(&self) -> Vec<&ColumnRef> {
        let mut v = vec![&self.name, &self.f0];
        v.extend(self.f1.iter().chain(&self.f2).chain(&self.f3));
        v
    }
}

struct ResolvedColumns {
    name: usize,
    f0: usize,
    formants: [[usize; 4]; 3],
}

impl ResolvedColumns {
    fn all(&self) -> Vec<usize> {
        let mut v = vec![self.name, self.f0];
        v.extend(self.formants.iter().flatten().copied());
        v
    }
}

enum Delimiter {
    Comma,
    Whitespace,
}

fn split_row(line: &str, delim: &Delimiter) -> Result<Vec<String>, String> {
    match delim {
        Delimiter::Whitespace => Ok(line.split_whitespace().map(str::to_string).collect()),
        Delimiter::Comma => {
            let mut rdr = csv::ReaderBuilder::new()
                .has_headers(false)
                .from_reader(line.as_bytes());
            match rdr.records().next() {
                Some(Ok(rec)) => Ok(rec.iter().map(|s| s.trim().to_string()).collect()),
                Some(Err(e)) => Err(e.to_string()),
                None => Ok(Vec::new()),
            }
        }
    }
}

/// Parses a delimited formant table held in memory. Comma vs whitespace
/// delimiting is detected from the first non-blank line. Blank lines and
/// lines starting with `#` are skipped.
pub fn ingest_str(text: &str, map: &ColumnMap) -> Result<Vec<FeatureRecord>, DatasetError> {
    let mut lines = text
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let Some(first) = lines.clone().next() else {
        return Ok(Vec::new());
    };
    let delim = if first.contains(',') {
        Delimiter::Comma
    } else {
        Delimiter::Whitespace
    };
    let header = if map.header {
        let line = lines.next().unwrap_or_default();
        Some(split_row(line, &delim).map_err(|reason| DatasetError::MalformedRow { row: 0, reason })?)
    } else {
        None
    };
    let cols = map.resolve(header.as_deref())?;

    let mut records = Vec::new();
    for (row, line) in lines.enumerate() {
        let malformed = |reason: String| DatasetError::MalformedRow { row, reason };
        let cells = split_row(line, &delim).map_err(malformed)?;
        let cell = |idx: usize| -> Result<&str, DatasetError> {
            cells
                .get(idx)
                .map(String::as_str)
                .ok_or_else(|| malformed(format!("no cell at column {idx}")))
        };
        let number = |idx: usize| -> Result<f64, DatasetError> {
            let raw = cell(idx)?;
            let v = f64::from_str(raw).map_err(|_| malformed(format!("{raw:?} is not a number")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(malformed(format!("{raw:?} is not finite")))
            }
        };
        let name = cell(cols.name)?.to_string();
        let (group, speaker_id, phoneme) =
            parse_filename(&name).map_err(|e| malformed(e.to_string()))?;
        let f0_ss = number(cols.f0)?;
        let mut formants = [[0.0; 4]; 3];
        for (fi, points) in cols.formants.iter().enumerate() {
            for (pi, &idx) in points.iter().enumerate() {
                formants[fi][pi] = number(idx)?;
            }
        }
        records.push(FeatureRecord {
            name,
            group,
            speaker_id,
            phoneme,
            f0_ss,
            formants,
        });
    }
    Ok(records)
}

pub fn ingest(path: impl AsRef<Path>, map: &ColumnMap) -> Result<Vec<FeatureRecord>, DatasetError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    ingest_str(&text, map)
}

/// Writes records in the default named layout, so that
/// `ingest_str(&to_table(r), &ColumnMap::default())` returns `r`.
pub fn to_table(records: &[FeatureRecord]) -> String {
    let mut out = ColumnMap::default_header().join(",");
    out.push('\n');
    for r in records {
        out.push_str(&r.name);
        out.push(',');
        out.push_str(&r.f0_ss.to_string());
        for v in r.formants.iter().flatten() {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

/// Separates complete records from those carrying a zero (failed) F0 or
/// formant value. Input order is preserved in both outputs.
pub fn filter_nulls(records: Vec<FeatureRecord>) -> (Vec<FeatureRecord>, Vec<FeatureRecord>) {
    records.into_iter().partition(FeatureRecord::is_complete)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupCounts {
    pub total: usize,
    pub boys: usize,
    pub girls: usize,
    pub men: usize,
    pub women: usize,
}

impl GroupCounts {
    fn add(&mut self, group: SpeakerGroup) {
        self.total += 1;
        match group {
            SpeakerGroup::Boy => self.boys += 1,
            SpeakerGroup::Girl => self.girls += 1,
            SpeakerGroup::Man => self.men += 1,
            SpeakerGroup::Woman => self.women += 1,
        }
    }

    pub fn as_tuple(&self) -> (usize, usize, usize, usize, usize) {
        (self.total, self.boys, self.girls, self.men, self.women)
    }
}

/// Per-phoneme sample counts broken down by speaker group.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassStats {
    pub rows: [GroupCounts; 12],
}

impl ClassStats {
    pub fn row(&self, p: PhonemeClass) -> GroupCounts {
        self.rows[p.label_id()]
    }

    pub fn totals(&self) -> GroupCounts {
        self.rows.iter().fold(GroupCounts::default(), |acc, r| GroupCounts {
            total: acc.total + r.total,
            boys: acc.boys + r.boys,
            girls: acc.girls + r.girls,
            men: acc.men + r.men,
            women: acc.women + r.women,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("phoneme,samples,boys,girls,men,women,label_id\n");
        for p in PhonemeClass::ALL {
            let r = self.row(p);
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                p, r.total, r.boys, r.girls, r.men, r.women, p.label_id()
            ));
        }
        let t = self.totals();
        out.push_str(&format!(
            "TOTAL,{},{},{},{},{},12\n",
            t.total, t.boys, t.girls, t.men, t.women
        ));
        out
    }
}

pub fn class_stats(records: &[FeatureRecord]) -> ClassStats {
    let mut stats = ClassStats::default();
    for r in records {
        stats.rows[r.phoneme.label_id()].add(r.group);
    }
    stats
}

/// Train/dev/test fractions plus the shuffling seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub dev_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl SplitSpec {
    /// 70 / 15 / 15.
    pub fn standard(seed: u64) -> Self {
        SplitSpec {
            train_frac: 0.70,
            dev_frac: 0.15,
            test_frac: 0.15,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let fr = [self.train_frac, self.dev_frac, self.test_frac];
        let sum: f64 = fr.iter().sum();
        if fr.iter().any(|&f| !(f > 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(DatasetError::InvalidSplit(fr[0], fr[1], fr[2]));
        }
        Ok(())
    }

    /// `(train, dev, test)` sizes for `n` items. Dev and test are rounded
    /// from their fractions; the remainder goes to train.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let dev = ((n as f64) * self.dev_frac).round() as usize;
        let test = ((n as f64) * self.test_frac).round() as usize;
        let dev = dev.min(n);
        let test = test.min(n - dev);
        (n - dev - test, dev, test)
    }
}

/// Index-level split of `0..n`.
pub fn split_indices(
    n: usize,
    spec: &SplitSpec,
) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>), DatasetError> {
    spec.validate()?;
    if n == 0 {
        return Err(DatasetError::EmptyInput);
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed::derived_rng(spec.seed, &[seed::stream::SPLIT]));
    let (n_train, n_dev, _) = spec.sizes(n);
    let test = idx.split_off(n_train + n_dev);
    let dev = idx.split_off(n_train);
    Ok((idx, dev, test))
}

fn canonical_order(records: &[FeatureRecord]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (&records[a], &records[b]);
        ra.name
            .cmp(&rb.name)
            .then(ra.f0_ss.total_cmp(&rb.f0_ss))
            .then_with(|| {
                let fa = ra.formants.iter().flatten();
                let fb = rb.formants.iter().flatten();
                fa.zip(fb)
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
    });
    order
}

type Split = (Vec<FeatureRecord>, Vec<FeatureRecord>, Vec<FeatureRecord>);

/// Seeded train/dev/test split. Records are first put in a canonical order,
/// so the result depends on the record set and the seed, not on input order.
pub fn split(records: &[FeatureRecord], spec: &SplitSpec) -> Result<Split, DatasetError> {
    let order = canonical_order(records);
    let (tr, dv, te) = split_indices(records.len(), spec)?;
    let pick = |ix: Vec<usize>| ix.into_iter().map(|i| records[order[i]].clone()).collect();
    Ok((pick(tr), pick(dv), pick(te)))
}

/// `k` (train, validation) index pairs over `0..n`. Validation folds
/// partition the shuffled indices into contiguous chunks whose sizes differ
/// by at most one.
pub fn kfold_indices(
    n: usize,
    k: usize,
    seed: u64,
) -> Result<Vec<(Vec<usize>, Vec<usize>)>, DatasetError> {
    if k < 2 || k > n {
        return Err(DatasetError::KTooLarge { k, n });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed::derived_rng(seed, &[seed::stream::FOLD]));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        let val: Vec<usize> = idx[start..start + len].to_vec();
        let train: Vec<usize> = idx[..start].iter().chain(&idx[start + len..]).copied().collect();
        folds.push((train, val));
        start += len;
    }
    Ok(folds)
}

pub fn kfold(
    records: &[FeatureRecord],
    k: usize,
    seed: u64,
) -> Result<Vec<(Vec<FeatureRecord>, Vec<FeatureRecord>)>, DatasetError> {
    let order = canonical_order(records);
    let pick = |ix: &[usize]| ix.iter().map(|&i| records[order[i]].clone()).collect::<Vec<_>>();
    Ok(kfold_indices(records.len(), k, seed)?
        .into_iter()
        .map(|(tr, va)| (pick(&tr), pick(&va)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn record(name: &str, f0: f64, v: f64) -> FeatureRecord {
        let (group, speaker_id, phoneme) = parse_filename(name).unwrap();
        FeatureRecord {
            name: name.into(),
            group,
            speaker_id,
            phoneme,
            f0_ss: f0,
            formants: [[v; 4]; 3],
        }
    }

    fn many(n: usize) -> Vec<FeatureRecord> {
        (0..n)
            .map(|i| record(&format!("m{:02}{}", i % 100, PhonemeClass::ALL[i % 12]), 100.0 + i as f64, 500.0))
            .collect()
    }

    #[test]
    fn column_map_detection() {
        assert_eq!(ColumnMap::detect("# c\nfile,f0,f1_10\nm01ae,100,500\n"), ColumnMap::default());
        assert_eq!(ColumnMap::detect("m01ae 240 110 500\n"), ColumnMap::hgcw_bigdata());
        assert_eq!(ColumnMap::detect(""), ColumnMap::hgcw_bigdata());
    }

    #[test]
    fn filenames_decode() {
        assert_eq!(parse_filename("m10ae"), Ok((SpeakerGroup::Man, 10, PhonemeClass::Ae)));
        assert_eq!(parse_filename("w49ih"), Ok((SpeakerGroup::Woman, 49, PhonemeClass::Ih)));
        assert_eq!(parse_filename("b11ei"), Ok((SpeakerGroup::Boy, 11, PhonemeClass::Ei)));
        assert_eq!(parse_filename("g20oo.wav"), Ok((SpeakerGroup::Girl, 20, PhonemeClass::Oo)));
        assert_eq!(parse_filename("x01ae"), Err(DatasetError::UnknownGroupChar('x')));
        assert!(matches!(parse_filename("m1aae"), Err(DatasetError::NonNumericSpeakerId(_))));
        assert!(matches!(parse_filename("m10zz"), Err(DatasetError::UnknownArpabetCode(_))));
        assert!(matches!(parse_filename("m10"), Err(DatasetError::NameTooShort(_))));
    }

    #[test]
    fn label_ids_follow_table_order() {
        let codes = ["ae", "ah", "aw", "eh", "er", "ei", "ih", "iy", "oa", "oo", "uh", "uw"];
        for (id, code) in codes.iter().enumerate() {
            let p = PhonemeClass::from_arpabet(code).unwrap();
            assert_eq!(p.label_id(), id);
            assert_eq!(PhonemeClass::from_label_id(id), Some(p));
        }
    }

    #[test]
    fn speaker_classes_pool_children() {
        assert_eq!(SpeakerGroup::Boy.speaker_class(), SpeakerClass::Children);
        assert_eq!(SpeakerGroup::Girl.speaker_class(), SpeakerClass::Children);
        assert_eq!(SpeakerGroup::Man.speaker_class(), SpeakerClass::Men);
        assert_eq!(SpeakerGroup::Woman.speaker_class(), SpeakerClass::Women);
    }

    #[test]
    fn ingest_three_rows() {
        let text = "file,f0,f1_10,f1_50,f1_ss,f1_80,f2_10,f2_50,f2_ss,f2_80,f3_10,f3_50,f3_ss,f3_80\n\
                    m10ae,135,1,2,270,4,5,6,2290,8,9,10,3010,12\n\
                    w49ih,220,1,2,3,4,5,6,7,8,9,10,11,12\n\
                    g20oo,250,1,2,3,4,5,6,7,8,9,10,11,0\n";
        let recs = ingest_str(text, &ColumnMap::default()).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[0].formant(1, SamplePoint::SteadyState), 270.0);
        assert_eq!(recs[0].formant(2, SamplePoint::SteadyState), 2290.0);
        assert_eq!(recs[0].formant(3, SamplePoint::At80), 12.0);
        assert_eq!(recs[2].formant(3, SamplePoint::At80), 0.0);
    }

    #[test]
    fn ingest_whitespace_positional() {
        let text = "m10ae 250 135 270 2290 3010 3500 280 2200 2950 275 2280 3000 290 2250 2990\n";
        let recs = ingest_str(text, &ColumnMap::hgcw_bigdata()).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].f0_ss, 135.0);
        assert_eq!(recs[0].formant(1, SamplePoint::SteadyState), 270.0);
        assert_eq!(recs[0].formant(1, SamplePoint::At10), 280.0);
        assert_eq!(recs[0].formant(3, SamplePoint::At80), 2990.0);
    }

    #[test]
    fn ingest_missing_column() {
        let mut header = ColumnMap::default_header();
        header.retain(|c| c != "f3_80");
        let text = format!("{}\n", header.join(","));
        assert_eq!(
            ingest_str(&text, &ColumnMap::default()),
            Err(DatasetError::MissingColumn("f3_80".into()))
        );
    }

    #[test]
    fn ingest_reports_malformed_rows() {
        let text = format!(
            "{}\nm10ae,135,1,2,3,4,5,6,7,8,9,10,11,12\nm11ae,abc,1,2,3,4,5,6,7,8,9,10,11,12\n",
            ColumnMap::default_header().join(",")
        );
        match ingest_str(&text, &ColumnMap::default()) {
            Err(DatasetError::MalformedRow { row, .. }) => assert_eq!(row, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn table_round_trip() {
        let recs = vec![record("m10ae", 135.5, 270.25), record("g07uw", 251.0, 0.0)];
        assert_eq!(ingest_str(&to_table(&recs), &ColumnMap::default()).unwrap(), recs);
    }

    #[test]
    fn filtering_nulls() {
        let mut bad = record("m10ae", 135.0, 500.0);
        bad.formants[2][1] = 0.0;
        let good = record("m11ae", 135.0, 500.0);
        let zero_f0 = record("m12ae", 0.0, 500.0);
        let (kept, dropped) = filter_nulls(vec![bad.clone(), good.clone(), zero_f0.clone()]);
        assert_eq!(kept, vec![good]);
        assert_eq!(dropped, vec![bad, zero_f0]);
        assert_eq!(filter_nulls(Vec::new()), (Vec::new(), Vec::new()));
    }

    #[test]
    fn stats_single_record() {
        let stats = class_stats(&[record("m03uw", 120.0, 500.0)]);
        assert_eq!(stats.row(PhonemeClass::Uw).as_tuple(), (1, 0, 0, 1, 0));
        assert_eq!(stats.totals().total, 1);
    }

    #[test]
    fn split_sizes() {
        let spec = SplitSpec::standard(42);
        let (a, b, c) = split(&many(100), &spec).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (70, 15, 15));
        let (a, b, c) = split(&many(101), &spec).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (71, 15, 15));
        assert_eq!(split(&[], &spec), Err(DatasetError::EmptyInput));
    }

    #[test]
    fn split_is_deterministic_and_order_independent() {
        let recs = many(60);
        let spec = SplitSpec::standard(9);
        let first = split(&recs, &spec).unwrap();
        assert_eq!(first, split(&recs, &spec).unwrap());
        let mut reversed = recs.clone();
        reversed.reverse();
        assert_eq!(first, split(&reversed, &spec).unwrap());
        let other = split(&recs, &SplitSpec::standard(10)).unwrap();
        assert_ne!(first, other);
    }

    #[test]
    fn split_rejects_bad_fractions() {
        let spec = SplitSpec {
            train_frac: 0.7,
            dev_frac: 0.2,
            test_frac: 0.2,
            seed: 0,
        };
        assert!(matches!(split_indices(10, &spec), Err(DatasetError::InvalidSplit(..))));
    }

    #[test]
    fn kfold_partitions() {
        let folds = kfold_indices(9, 3, 1).unwrap();
        assert_eq!(folds.len(), 3);
        let mut seen = HashSet::new();
        for (train, val) in &folds {
            assert_eq!(val.len(), 3);
            assert_eq!(train.len(), 6);
            for v in val {
                assert!(seen.insert(*v));
                assert!(!train.contains(v));
            }
        }
        assert_eq!(seen.len(), 9);
        assert_eq!(kfold_indices(3, 4, 0), Err(DatasetError::KTooLarge { k: 4, n: 3 }));
        assert!(kfold_indices(3, 1, 0).is_err());
    }

    #[test]
    fn kfold_on_records_is_order_independent() {
        let recs = many(20);
        let mut rev = recs.clone();
        rev.reverse();
        assert_eq!(kfold(&recs, 4, 3).unwrap(), kfold(&rev, 4, 3).unwrap());
    }
}
