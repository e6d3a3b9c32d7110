//! Relearning: retrain a pool member with a probe object injected under each
//! class label and measure how far the member's score at the probe moves.
//!
//! For member `k` and object `x`:
//!
//! ```text
//! σ⁻ = |s_k(x) − s_k⁻(x)|     s_k⁻ trained on D_k ∪ {(x, −1)}
//! σ⁺ = |s_k(x) − s_k⁺(x)|     s_k⁺ trained on D_k ∪ {(x, +1)}
//! ```
//!
//! Relearned members share the base member's config and scaler, and the
//! solver resumes from the base solution.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counter::TrainingCounter;
use crate::data::{Dataset, Label, LabeledSample};
use crate::error::{check_dim, Error, Result};
use crate::pool::{ClassifierPool, PoolMember};
use crate::svm::{SvmModel, TrainedSvm};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratedFeatures {
    pub base_score: f64,
    pub sigma_minus: f64,
    pub sigma_plus: f64,
}

impl GeneratedFeatures {
    pub fn sigma_sum(&self) -> f64 {
        self.sigma_minus + self.sigma_plus
    }

    /// Drift caused by injecting `label`.
    pub fn sigma_for(&self, label: Label) -> f64 {
        match label {
            Label::Negative => self.sigma_minus,
            Label::Positive => self.sigma_plus,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecondLevelRow {
    pub raw_features: Vec<f64>,
    pub generated: GeneratedFeatures,
    /// 1 when the base member classifies the object correctly, else 0.
    pub target: u8,
}

/// Raw features followed by score, σ⁻ and σ⁺: the `d + 3` inputs of a second-level model.
pub fn meta_features(raw: &[f64], generated: &GeneratedFeatures) -> Vec<f64> {
    let mut v = Vec::with_capacity(raw.len() + 3);
    v.extend_from_slice(raw);
    v.extend([generated.base_score, generated.sigma_minus, generated.sigma_plus]);
    v
}

impl SecondLevelRow {
    pub fn meta_features(&self) -> Vec<f64> {
        meta_features(&self.raw_features, &self.generated)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecondLevelDataset {
    pub rows: Vec<SecondLevelRow>,
    pub classifier_index: usize,
    pub d: usize,
}

impl SecondLevelDataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn targets(&self) -> impl Iterator<Item = u8> + '_ {
        self.rows.iter().map(|r| r.target)
    }

    /// Meta-features with targets mapped 0 → −1, 1 → +1.
    pub fn to_dataset(&self) -> Result<Dataset> {
        let samples = self
            .rows
            .iter()
            .map(|r| {
                let label = if r.target == 1 {
                    Label::Positive
                } else {
                    Label::Negative
                };
                LabeledSample::new(r.meta_features(), label)
            })
            .collect();
        Dataset::new(format!("meta-{}", self.classifier_index), samples)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.d).map(|j| format!("x{j}")).collect();
        header.extend(["base_score", "sigma_minus", "sigma_plus", "target"].map(String::from));
        w.write_record(&header).map_err(csv_err)?;
        for r in &self.rows {
            let mut rec: Vec<String> = r.raw_features.iter().map(f64::to_string).collect();
            rec.push(r.generated.base_score.to_string());
            rec.push(r.generated.sigma_minus.to_string());
            rec.push(r.generated.sigma_plus.to_string());
            rec.push(r.target.to_string());
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Input(format!("csv flush: {e}")))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn read_csv<R: Read>(reader: R, classifier_index: usize) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let width = rdr.headers().map_err(csv_err)?.len();
        if width < 5 {
            return Err(Error::Schema(format!("meta-dataset dump has {width} columns")));
        }
        let d = width - 4;
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(csv_err)?;
            let line = rec.position().map_or(0, |p| p.line());
            let num = |i: usize| -> Result<f64> {
                rec[i].parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("column {i}: {:?}", &rec[i]),
                })
            };
            let raw_features = (0..d).map(num).collect::<Result<Vec<_>>>()?;
            let generated = GeneratedFeatures {
                base_score: num(d)?,
                sigma_minus: num(d + 1)?,
                sigma_plus: num(d + 2)?,
            };
            let target = match &rec[d + 3] {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(Error::Parse {
                        line,
                        message: format!("target must be 0 or 1, got {other:?}"),
                    })
                }
            };
            rows.push(SecondLevelRow {
                raw_features,
                generated,
                target,
            });
        }
        Ok(Self {
            rows,
            classifier_index,
            d,
        })
    }

    pub fn load_csv(path: impl AsRef<Path>, classifier_index: usize) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file, classifier_index)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse {
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    }
}

/// `fold` plus `(x, injected)` appended; the input is left untouched.
pub fn augment(fold: &Dataset, x: &[f64], injected: Label) -> Result<Dataset> {
    fold.with_appended(LabeledSample::new(x.to_vec(), injected))
}

/// The two relearned models for probe `x`: injected as −1, then as +1.
pub fn relearn_pair(base: &TrainedSvm, x: &[f64]) -> Result<(SvmModel, SvmModel)> {
    Ok((base.relearn(x, Label::Negative)?, base.relearn(x, Label::Positive)?))
}

pub fn sigma_features(
    base: &SvmModel,
    model_minus: &SvmModel,
    model_plus: &SvmModel,
    x: &[f64],
) -> Result<GeneratedFeatures> {
    let base_score = base.score(x)?;
    Ok(GeneratedFeatures {
        base_score,
        sigma_minus: (base_score - model_minus.score(x)?).abs(),
        sigma_plus: (base_score - model_plus.score(x)?).abs(),
    })
}

/// Relearned scores keyed by `(member, object index, injected label)`.
#[derive(Debug, Default)]
pub struct RelearnCache {
    scores: Mutex<HashMap<(usize, usize, Label), f64>>,
}

impl RelearnCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.scores.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get(&self, key: (usize, usize, Label)) -> Option<f64> {
        self.scores.lock().expect("cache lock").get(&key).copied()
    }

    fn insert(&self, key: (usize, usize, Label), score: f64) {
        self.scores.lock().expect("cache lock").insert(key, score);
    }
}

/// Relearned score at `x`, or the base score if the solver fails.
fn relearned_or_base(member: &PoolMember, x: &[f64], label: Label, base_score: f64) -> Result<f64> {
    match member.svm.relearned_score(x, label) {
        Ok(s) => Ok(s),
        Err(e @ Error::NotConverged { .. }) => {
            log::warn!("relearning with label {label} failed ({e}); using the base model");
            Ok(base_score)
        }
        Err(e) => Err(e),
    }
}

fn member_features(
    member: &PoolMember,
    x: &[f64],
    key: Option<(usize, usize, &RelearnCache)>,
    counter: &TrainingCounter,
) -> Result<GeneratedFeatures> {
    let base_score = member.model().score(x)?;
    let relearned = |label: Label| -> Result<f64> {
        if let Some((k, i, cache)) = key {
            if let Some(s) = cache.get((k, i, label)) {
                return Ok(s);
            }
            let s = relearned_or_base(member, x, label, base_score)?;
            counter.add_relearn(1);
            cache.insert((k, i, label), s);
            Ok(s)
        } else {
            let s = relearned_or_base(member, x, label, base_score)?;
            counter.add_relearn(1);
            Ok(s)
        }
    };
    let minus = relearned(Label::Negative)?;
    let plus = relearned(Label::Positive)?;
    Ok(GeneratedFeatures {
        base_score,
        sigma_minus: (base_score - minus).abs(),
        sigma_plus: (base_score - plus).abs(),
    })
}

/// One row per validation object for member `k`; `2·|validation|` relearnings
/// unless served from `cache`.
pub fn build_second_level_dataset(
    k: usize,
    pool: &ClassifierPool,
    validation: &Dataset,
    cache: Option<&RelearnCache>,
    counter: &TrainingCounter,
) -> Result<SecondLevelDataset> {
    let member = pool.member(k)?;
    check_dim(pool.dim(), validation.dim())?;
    if validation.is_empty() {
        return Err(Error::Input("validation set is empty".into()));
    }
    let rows = validation
        .samples()
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let generated = member_features(member, &s.features, cache.map(|c| (k, i, c)), counter)?;
            let predicted = Label::from_score(generated.base_score, pool.tie());
            Ok(SecondLevelRow {
                raw_features: s.features.clone(),
                generated,
                target: u8::from(predicted == s.label),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SecondLevelDataset {
        rows,
        classifier_index: k,
        d: validation.dim(),
    })
}

/// Generated features of a new object for member `k`; two relearnings.
pub fn probe_features(
    k: usize,
    pool: &ClassifierPool,
    x0: &[f64],
    counter: &TrainingCounter,
) -> Result<GeneratedFeatures> {
    let member = pool.member(k)?;
    check_dim(pool.dim(), x0.len())?;
    member_features(member, x0, None, counter)
}
