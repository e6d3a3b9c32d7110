//! Labeled datasets: CSV ingestion, the two-Gaussian synthetic generator and
//! the stratified 5x2 cross-validation splitter.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Binary class label, `-1` or `+1` on the wire.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Label {
    Negative,
    Positive,
}

/// Label assigned when a score or vote is exactly zero.
pub const DEFAULT_TIE: Label = Label::Negative;

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Negative => -1.0,
            Label::Positive => 1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Label::Negative => -1,
            Label::Positive => 1,
        }
    }

    pub fn opposite(self) -> Label {
        match self {
            Label::Negative => Label::Positive,
            Label::Positive => Label::Negative,
        }
    }

    /// `+1` for positive scores, `-1` for negative ones, `tie` at exactly zero.
    pub fn from_score(score: f64, tie: Label) -> Label {
        if score > 0.0 {
            Label::Positive
        } else if score < 0.0 {
            Label::Negative
        } else {
            tie
        }
    }
}

impl From<Label> for i8 {
    fn from(label: Label) -> i8 {
        label.as_i8()
    }
}

impl TryFrom<i8> for Label {
    type Error = String;

    fn try_from(value: i8) -> std::result::Result<Self, Self::Error> {
        match value {
            -1 => Ok(Label::Negative),
            1 => Ok(Label::Positive),
            other => Err(format!("label must be -1 or +1, got {other}")),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_i8())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub label: Label,
}

impl LabeledSample {
    pub fn new(features: Vec<f64>, label: Label) -> Self {
        Self { features, label }
    }
}

/// An ordered collection of samples sharing one dimensionality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    name: String,
    dim: usize,
    samples: Vec<LabeledSample>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, samples: Vec<LabeledSample>) -> Result<Self> {
        let dim = samples
            .first()
            .map(|s| s.features.len())
            .ok_or_else(|| Error::Input("dataset has no samples".into()))?;
        if dim == 0 {
            return Err(Error::Input("samples have zero features".into()));
        }
        for (i, s) in samples.iter().enumerate() {
            check_dim(dim, s.features.len())?;
            if let Some(v) = s.features.iter().find(|v| !v.is_finite()) {
                return Err(Error::Input(format!("sample {i} has non-finite feature {v}")));
            }
        }
        Ok(Self {
            name: name.into(),
            dim,
            samples,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.samples.iter().map(|s| s.label)
    }

    /// `(negatives, positives)`.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels().filter(|&l| l == Label::Positive).count();
        (self.len() - pos, pos)
    }

    pub fn has_both_classes(&self) -> bool {
        let (neg, pos) = self.class_counts();
        neg > 0 && pos > 0
    }

    pub fn ensure_both_classes(&self) -> Result<()> {
        if self.has_both_classes() {
            Ok(())
        } else {
            Err(Error::SingleClass(self.name.clone()))
        }
    }

    /// New dataset made of the samples at `indices`, repeats allowed.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let samples = indices
            .iter()
            .map(|&i| {
                self.samples
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::Input(format!("index {i} out of range for {} samples", self.len())))
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(self.name.clone(), samples)
    }

    /// Copy of this dataset with one extra sample appended.
    pub fn with_appended(&self, sample: LabeledSample) -> Result<Dataset> {
        check_dim(self.dim, sample.features.len())?;
        if sample.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("appended sample has non-finite features".into()));
        }
        let mut samples = Vec::with_capacity(self.len() + 1);
        samples.extend_from_slice(&self.samples);
        samples.push(sample);
        Ok(Dataset {
            name: self.name.clone(),
            dim: self.dim,
            samples,
        })
    }

    /// Same samples with every feature mapped through `scale * x + shift`, per column.
    pub fn affine(&self, scale: &[f64], shift: &[f64]) -> Result<Dataset> {
        check_dim(self.dim, scale.len())?;
        check_dim(self.dim, shift.len())?;
        let samples = self
            .samples
            .iter()
            .map(|s| {
                let features = s
                    .features
                    .iter()
                    .zip(scale.iter().zip(shift))
                    .map(|(x, (a, b))| a * x + b)
                    .collect();
                LabeledSample::new(features, s.label)
            })
            .collect();
        Dataset::new(self.name.clone(), samples)
    }
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

/// Column layout of a delimited class-label file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvSchema {
    /// Zero-based column holding the class token.
    pub label_column: usize,
    /// Zero-based columns that are neither features nor the label (row ids).
    pub ignore_columns: Vec<usize>,
    pub has_header: bool,
    /// Expected column count; inferred from the first row when absent.
    pub n_columns: Option<usize>,
    /// The two admissible class tokens; inferred from the file when absent.
    pub class_tokens: Option<[String; 2]>,
    /// Token mapped to `+1`. When absent the minority class becomes `+1`.
    pub positive_token: Option<String>,
    pub missing_token: String,
    /// Remove rows with missing cells instead of imputing column means.
    pub drop_missing: bool,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            label_column: 0,
            ignore_columns: Vec::new(),
            has_header: false,
            n_columns: None,
            class_tokens: None,
            positive_token: None,
            missing_token: "?".into(),
            drop_missing: false,
        }
    }
}

impl CsvSchema {
    /// UCI `breast-cancer-wisconsin.data`: id, nine cytology scores, class 2/4.
    pub fn breast_cancer() -> Self {
        Self {
            label_column: 10,
            ignore_columns: vec![0],
            n_columns: Some(11),
            class_tokens: Some(["2".into(), "4".into()]),
            positive_token: Some("4".into()),
            ..Self::default()
        }
    }

    /// UCI `bupa.data`: six measurements, the selector column as the class.
    pub fn bupa() -> Self {
        Self {
            label_column: 6,
            n_columns: Some(7),
            class_tokens: Some(["1".into(), "2".into()]),
            ..Self::default()
        }
    }

    /// `pima-indians-diabetes.data`: eight measurements, class 0/1.
    pub fn pima() -> Self {
        Self {
            label_column: 8,
            n_columns: Some(9),
            class_tokens: Some(["0".into(), "1".into()]),
            positive_token: Some("1".into()),
            ..Self::default()
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema, name: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema, name)
}

/// Parses class-labelled rows from any reader; see [`load_csv`].
pub fn read_csv<R: std::io::Read>(reader: R, schema: &CsvSchema, name: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(schema.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut width = schema.n_columns;
    // (features with None for missing cells, class token)
    let mut rows: Vec<(Vec<Option<f64>>, String)> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::Parse {
                line,
                message: format!("expected {expected} columns, found {}", record.len()),
            });
        }
        if schema.label_column >= expected {
            return Err(Error::Schema(format!(
                "label column {} outside {expected} columns",
                schema.label_column
            )));
        }
        let mut features = Vec::with_capacity(expected);
        for (col, cell) in record.iter().enumerate() {
            if col == schema.label_column || schema.ignore_columns.contains(&col) {
                continue;
            }
            if cell == schema.missing_token {
                features.push(None);
                continue;
            }
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                line,
                message: format!("column {col}: cannot parse {cell:?} as a number"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("column {col}: non-finite value {cell:?}"),
                });
            }
            features.push(Some(value));
        }
        rows.push((features, record[schema.label_column].to_string()));
    }
    if rows.is_empty() {
        return Err(Error::Input(format!("{name}: no data rows")));
    }

    let mapping = label_mapping(&rows, schema)?;

    if schema.drop_missing {
        rows.retain(|(f, _)| f.iter().all(Option::is_some));
        if rows.is_empty() {
            return Err(Error::Input(format!("{name}: every row has missing cells")));
        }
    }

    let dim = rows[0].0.len();
    let mut means = vec![0.0; dim];
    for (col, mean) in means.iter_mut().enumerate() {
        let present: Vec<f64> = rows.iter().filter_map(|(f, _)| f[col]).collect();
        if present.is_empty() {
            return Err(Error::Schema(format!(
                "{name}: feature column {col} is entirely missing"
            )));
        }
        *mean = present.iter().sum::<f64>() / present.len() as f64;
    }

    let samples = rows
        .into_iter()
        .map(|(features, token)| {
            let features = features.iter().zip(&means).map(|(v, m)| v.unwrap_or(*m)).collect();
            LabeledSample::new(features, mapping[&token])
        })
        .collect();
    Dataset::new(name, samples)
}

fn label_mapping(rows: &[(Vec<Option<f64>>, String)], schema: &CsvSchema) -> Result<BTreeMap<String, Label>> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for (_, token) in rows {
        *counts.entry(token.as_str()).or_default() += 1;
    }
    if let Some(tokens) = &schema.class_tokens {
        if let Some(bad) = counts.keys().find(|t| !tokens.iter().any(|k| k == *t)) {
            return Err(Error::Schema(format!(
                "unknown label token {bad:?}, expected one of {tokens:?}"
            )));
        }
        for t in tokens {
            counts.entry(t.as_str()).or_default();
        }
    }
    if counts.len() > 2 {
        return Err(Error::Schema(format!(
            "expected at most two class tokens, found {:?}",
            counts.keys().collect::<Vec<_>>()
        )));
    }
    let positive = match &schema.positive_token {
        Some(p) => {
            if !counts.contains_key(p.as_str()) {
                return Err(Error::Schema(format!("positive token {p:?} is not a class token")));
            }
            Some(p.clone())
        }
        // Majority -> -1. On an exact tie the lexicographically larger token is +1.
        None if counts.len() == 2 => {
            let mut ranked: Vec<(&str, usize)> = counts.iter().map(|(t, c)| (*t, *c)).collect();
            ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
            Some(ranked[1].0.to_string())
        }
        None => None,
    };
    Ok(counts
        .keys()
        .map(|t| {
            let label = if Some(*t) == positive.as_deref() {
                Label::Positive
            } else {
                Label::Negative
            };
            (t.to_string(), label)
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Synthetic two-Gaussian data
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticParams {
    pub n_per_class: usize,
    /// Mean of the class labelled `-1`.
    pub mean_a: [f64; 2],
    /// Mean of the class labelled `+1`.
    pub mean_b: [f64; 2],
    pub cov_a: [[f64; 2]; 2],
    pub cov_b: [[f64; 2]; 2],
    pub seed: u64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            n_per_class: 200,
            mean_a: [1.0, 1.0],
            mean_b: [2.0, 0.0],
            cov_a: [[1.0, 0.0], [0.0, 0.25]],
            cov_b: [[0.04, 0.0], [0.0, 4.0]],
            seed: 7,
        }
    }
}

/// Lower Cholesky factor of a symmetric positive-definite 2x2 matrix.
fn cholesky2(cov: &[[f64; 2]; 2]) -> Result<[[f64; 2]; 2]> {
    let [[a, b], [c, d]] = *cov;
    let finite = [a, b, c, d].iter().all(|v| v.is_finite());
    if !finite || (b - c).abs() > 1e-12 * (1.0 + b.abs()) {
        return Err(Error::Parameter(format!("covariance {cov:?} is not symmetric")));
    }
    if a <= 0.0 || a * d - b * c <= 0.0 {
        return Err(Error::Parameter(format!("covariance {cov:?} is not positive definite")));
    }
    let l11 = a.sqrt();
    let l21 = b / l11;
    let l22 = (d - l21 * l21).sqrt();
    Ok([[l11, 0.0], [l21, l22]])
}

pub fn generate_synthetic(params: &SyntheticParams) -> Result<Dataset> {
    if params.n_per_class == 0 {
        return Err(Error::Parameter("n_per_class must be at least 1".into()));
    }
    let la = cholesky2(&params.cov_a)?;
    let lb = cholesky2(&params.cov_b)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut samples = Vec::with_capacity(2 * params.n_per_class);
    for (mean, chol, label) in [
        (params.mean_a, la, Label::Negative),
        (params.mean_b, lb, Label::Positive),
    ] {
        for _ in 0..params.n_per_class {
            let z0: f64 = rng.sample(StandardNormal);
            let z1: f64 = rng.sample(StandardNormal);
            let x = mean[0] + chol[0][0] * z0;
            let y = mean[1] + chol[1][0] * z0 + chol[1][1] * z1;
            samples.push(LabeledSample::new(vec![x, y], label));
        }
    }
    Dataset::new("Syn", samples)
}

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvPair {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Five repetitions of stratified two-fold cross-validation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvPlan {
    pub pairs: Vec<CvPair>,
    pub seed: u64,
}

/// Shuffles each class and deals it into two halves. Odd classes alternate
/// which half receives the extra sample so the halves differ by at most one.
/// Both halves are returned in ascending index order.
pub fn stratified_halves(labels: &[Label], rng: &mut impl Rng) -> (Vec<usize>, Vec<usize>) {
    let mut first = Vec::with_capacity(labels.len() / 2 + 1);
    let mut second = Vec::with_capacity(labels.len() / 2 + 1);
    let mut extra_to_first = true;
    for class in [Label::Negative, Label::Positive] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(rng);
        let mut half = idx.len() / 2;
        if idx.len() % 2 == 1 {
            if extra_to_first {
                half += 1;
            }
            extra_to_first = !extra_to_first;
        }
        first.extend_from_slice(&idx[..half]);
        second.extend_from_slice(&idx[half..]);
    }
    first.sort_unstable();
    second.sort_unstable();
    (first, second)
}

/// Stratified split putting roughly `fraction` of each class in the second part.
pub fn stratified_split(labels: &[Label], fraction: f64, rng: &mut impl Rng) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Parameter(format!("split fraction {fraction} not in (0, 1)")));
    }
    let mut kept = Vec::new();
    let mut held = Vec::new();
    for class in [Label::Negative, Label::Positive] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < 2 {
            return Err(Error::Split(format!("class {class} has fewer than 2 samples")));
        }
        idx.shuffle(rng);
        let n_held = ((idx.len() as f64 * fraction).round() as usize).clamp(1, idx.len() - 1);
        held.extend_from_slice(&idx[..n_held]);
        kept.extend_from_slice(&idx[n_held..]);
    }
    kept.sort_unstable();
    held.sort_unstable();
    Ok((kept, held))
}

pub fn split_5x2(dataset: &Dataset, seed: u64) -> Result<CvPlan> {
    let (neg, pos) = dataset.class_counts();
    if neg < 2 || pos < 2 {
        return Err(Error::Split(format!(
            "{}: need at least 2 samples per class, have {neg} negative and {pos} positive",
            dataset.name()
        )));
    }
    let labels: Vec<Label> = dataset.labels().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(10);
    for _ in 0..5 {
        let (a, b) = stratified_halves(&labels, &mut rng);
        pairs.push(CvPair {
            train: a.clone(),
            test: b.clone(),
        });
        pairs.push(CvPair { train: b, test: a });
    }
    Ok(CvPlan { pairs, seed })
}
