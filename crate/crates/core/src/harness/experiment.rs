use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method, ValidationMode};
use crate::counter::{TrainingCounter, TrainingCounts};
use crate::data::{split_5x2, stratified_split, Dataset, Label};
use crate::error::{Error, Result};
use crate::metrics::MetricValues;
use crate::pool::{sum_from_scores, train_pool, vote_from_scores, vote_margin};
use crate::res::{Polarity, ResEnsemble};
use crate::svm::SvmSearch;

/// Everything one train/test evaluation needs besides the data.
#[derive(Clone, Debug)]
pub struct PairSettings {
    pub k: usize,
    pub search: SvmSearch,
    pub validation: ValidationMode,
    pub polarity: Polarity,
    pub methods: Vec<Method>,
    pub max_validation: Option<usize>,
    pub seed: u64,
}

impl PairSettings {
    /// Settings used for CV pair `pair` of a run.
    pub fn for_pair(config: &ExperimentConfig, pair: usize) -> Self {
        Self::from_config(config, mix(config.pool_seed, pair as u64))
    }

    pub fn from_config(config: &ExperimentConfig, seed: u64) -> Self {
        Self {
            k: config.k,
            search: config.search(),
            validation: config.validation,
            polarity: config.polarity,
            methods: config.methods.clone(),
            max_validation: config.max_validation_for_relearning,
            seed,
        }
    }

    fn runs(&self, m: Method) -> bool {
        self.methods.contains(&m)
    }
}

/// Output of one method for one test object.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodOutput {
    pub label: Label,
    /// Continuous output used for AUC.
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectPrediction {
    pub truth: Label,
    pub sum: Option<MethodOutput>,
    pub res: Option<MethodOutput>,
    pub mv: Option<MethodOutput>,
    /// Members kept by selection (RES only).
    pub kept: Option<usize>,
    pub fallback: Option<bool>,
}

impl ObjectPrediction {
    pub fn output(&self, method: Method) -> Option<MethodOutput> {
        match method {
            Method::Sum => self.sum,
            Method::Res => self.res,
            Method::Mv => self.mv,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PairOutcome {
    pub predictions: Vec<ObjectPrediction>,
    pub metrics: BTreeMap<Method, MetricValues>,
    pub c_base: f64,
    /// The fitted pool with its meta-datasets and models (RES only).
    pub ensemble: Option<ResEnsemble>,
    pub meta_degenerate: usize,
    pub validation_size: usize,
    pub counts: TrainingCounts,
}

fn mix(a: u64, b: u64) -> u64 {
    // splitmix64 finalizer over a combined word
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Trains and evaluates every configured method on one train/test split.
///
/// Trainings per call: `K` members, `2·K·|validation|` relearnings, up to `K`
/// meta-models and `2·K·|test|` probe relearnings, plus grid searches.
pub fn run_pair(train: &Dataset, test: &Dataset, settings: &PairSettings) -> Result<PairOutcome> {
    let counter = TrainingCounter::new();
    let res = settings.runs(Method::Res);

    let (pool_train, validation) = match settings.validation {
        ValidationMode::Holdout(f) if res => {
            let labels: Vec<Label> = train.labels().collect();
            let mut rng = ChaCha8Rng::seed_from_u64(mix(settings.seed, 1));
            let (kept, held) = stratified_split(&labels, f, &mut rng)?;
            (train.subset(&kept)?, train.subset(&held)?)
        }
        _ => (train.clone(), train.clone()),
    };

    let base_config = settings.search.tune(&pool_train, mix(settings.seed, 2), &counter)?;
    let pool = train_pool(&pool_train, settings.k, &base_config, mix(settings.seed, 3), &counter)?;
    let tie = pool.tie();

    let member_scores = test
        .samples()
        .iter()
        .map(|s| pool.member_scores(&s.features))
        .collect::<Result<Vec<_>>>()?;

    let mut predictions: Vec<ObjectPrediction> = test
        .samples()
        .iter()
        .zip(&member_scores)
        .map(|(s, scores)| {
            let sum = settings.runs(Method::Sum).then(|| {
                let (label, score) = sum_from_scores(scores, tie);
                MethodOutput { label, score }
            });
            let mv = settings.runs(Method::Mv).then(|| MethodOutput {
                label: vote_from_scores(scores, tie),
                score: vote_margin(scores, tie),
            });
            ObjectPrediction {
                truth: s.label,
                sum,
                res: None,
                mv,
                kept: None,
                fallback: None,
            }
        })
        .collect();

    let mut fitted = None;
    let mut meta_degenerate = 0;
    let mut validation_size = 0;
    if res {
        let validation = cap_validation(&validation, settings.max_validation, mix(settings.seed, 4))?;
        validation_size = validation.len();
        let ensemble = ResEnsemble::fit(
            pool,
            &validation,
            &settings.search,
            settings.polarity,
            mix(settings.seed, 5),
            None,
            &counter,
        )?;
        meta_degenerate = ensemble.meta_models.iter().filter(|m| m.is_degenerate()).count();
        let decisions = test
            .samples()
            .par_iter()
            .map(|s| ensemble.classify(&s.features, &counter))
            .collect::<Result<Vec<_>>>()?;
        for (p, d) in predictions.iter_mut().zip(decisions) {
            p.res = Some(MethodOutput {
                label: d.label,
                score: d.aggregate_score,
            });
            p.kept = Some(d.mask.kept());
            p.fallback = Some(d.fallback_used);
        }
        fitted = Some(ensemble);
    }

    let truth: Vec<Label> = predictions.iter().map(|p| p.truth).collect();
    let mut metrics = BTreeMap::new();
    for method in Method::ALL {
        if !settings.runs(method) {
            continue;
        }
        let outputs: Vec<MethodOutput> = predictions
            .iter()
            .map(|p| p.output(method).expect("method ran"))
            .collect();
        let labels: Vec<Label> = outputs.iter().map(|o| o.label).collect();
        let scores: Vec<f64> = outputs.iter().map(|o| o.score).collect();
        metrics.insert(method, MetricValues::compute(&truth, &labels, &scores)?);
    }

    Ok(PairOutcome {
        predictions,
        metrics,
        c_base: base_config.c,
        ensemble: fitted,
        meta_degenerate,
        validation_size,
        counts: counter.snapshot(),
    })
}

fn cap_validation(validation: &Dataset, cap: Option<usize>, seed: u64) -> Result<Dataset> {
    match cap {
        Some(cap) if validation.len() > cap => {
            let mut idx: Vec<usize> = (0..validation.len()).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            idx.truncate(cap);
            idx.sort_unstable();
            validation.subset(&idx)
        }
        _ => Ok(validation.clone()),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    pub mean: MetricValues,
    pub per_fold: Vec<MetricValues>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub pair: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub validation_size: usize,
    pub c_base: f64,
    pub meta_degenerate: usize,
    /// Mean share of members kept per test object (RES only).
    pub kept_fraction: Option<f64>,
    pub fallback_rate: Option<f64>,
    pub counts: TrainingCounts,
    pub runtime_secs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetResult {
    pub name: String,
    pub n: usize,
    pub d: usize,
    pub error: Option<String>,
    pub methods: Vec<MethodResult>,
    pub folds: Vec<FoldRecord>,
    pub runtime_secs: f64,
}

impl DatasetResult {
    pub fn method(&self, method: Method) -> Option<&MethodResult> {
        self.methods.iter().find(|m| m.method == method)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub k: usize,
    pub cv_seed: u64,
    pub pool_seed: u64,
    pub datasets: Vec<DatasetResult>,
}

impl ResultsTable {
    pub fn dataset(&self, name: &str) -> Option<&DatasetResult> {
        self.datasets.iter().find(|d| d.name == name)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn mean_metrics(values: &[MetricValues]) -> MetricValues {
    let n = values.len() as f64;
    let avg = |f: fn(&MetricValues) -> f64| values.iter().map(f).sum::<f64>() / n;
    MetricValues {
        auc: avg(|m| m.auc),
        gmean: avg(|m| m.gmean),
        f1: avg(|m| m.f1),
        mcc: avg(|m| m.mcc),
    }
}

/// Runs the 5x2 protocol on every dataset. A dataset that fails is recorded
/// with its error and the remaining datasets still run.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultsTable> {
    config.validate()?;
    let mut datasets = Vec::with_capacity(config.datasets.len());
    for spec in &config.datasets {
        let started = Instant::now();
        let outcome = spec.load().and_then(|ds| run_dataset(config, &ds).map(|r| (ds, r)));
        let runtime_secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok((ds, (methods, folds))) => {
                log::info!("{}: done in {runtime_secs:.1}s", spec.name);
                datasets.push(DatasetResult {
                    name: spec.name.clone(),
                    n: ds.len(),
                    d: ds.dim(),
                    error: None,
                    methods,
                    folds,
                    runtime_secs,
                });
            }
            Err(e) => {
                log::error!("{}: {e}", spec.name);
                datasets.push(DatasetResult {
                    name: spec.name.clone(),
                    n: 0,
                    d: 0,
                    error: Some(e.to_string()),
                    methods: Vec::new(),
                    folds: Vec::new(),
                    runtime_secs,
                });
            }
        }
    }
    Ok(ResultsTable {
        k: config.k,
        cv_seed: config.cv_seed,
        pool_seed: config.pool_seed,
        datasets,
    })
}

fn run_dataset(config: &ExperimentConfig, ds: &Dataset) -> Result<(Vec<MethodResult>, Vec<FoldRecord>)> {
    let plan = split_5x2(ds, config.cv_seed)?;
    let mut per_method: BTreeMap<Method, Vec<MetricValues>> = BTreeMap::new();
    let mut folds = Vec::with_capacity(plan.pairs.len());
    for (p, pair) in plan.pairs.iter().enumerate() {
        let started = Instant::now();
        let train = ds.subset(&pair.train)?;
        let test = ds.subset(&pair.test)?;
        let settings = PairSettings::for_pair(config, p);
        let outcome = run_pair(&train, &test, &settings)?;
        let runtime_secs = started.elapsed().as_secs_f64();
        log::info!(
            "{} pair {p}: C={} {:?} ({runtime_secs:.1}s)",
            ds.name(),
            outcome.c_base,
            outcome.metrics.get(&Method::Res).or(outcome.metrics.values().next())
        );
        if config.write_artifacts {
            write_pair_artifacts(&config.output_dir, ds.name(), p, &pair.test, &outcome)?;
        }
        for (m, v) in &outcome.metrics {
            per_method.entry(*m).or_default().push(*v);
        }
        let res_preds: Vec<&ObjectPrediction> = outcome.predictions.iter().filter(|o| o.kept.is_some()).collect();
        let (kept_fraction, fallback_rate) = if res_preds.is_empty() {
            (None, None)
        } else {
            let n = res_preds.len() as f64;
            let kept = res_preds
                .iter()
                .map(|o| o.kept.unwrap() as f64 / config.k as f64)
                .sum::<f64>()
                / n;
            let fb = res_preds.iter().filter(|o| o.fallback == Some(true)).count() as f64 / n;
            (Some(kept), Some(fb))
        };
        folds.push(FoldRecord {
            pair: p,
            train_size: train.len(),
            test_size: test.len(),
            validation_size: outcome.validation_size,
            c_base: outcome.c_base,
            meta_degenerate: outcome.meta_degenerate,
            kept_fraction,
            fallback_rate,
            counts: outcome.counts,
            runtime_secs,
        });
    }
    let methods = Method::ALL
        .iter()
        .filter_map(|m| {
            per_method.remove(m).map(|per_fold| MethodResult {
                method: *m,
                mean: mean_metrics(&per_fold),
                per_fold,
            })
        })
        .collect();
    Ok((methods, folds))
}

/// `<output_dir>/<dataset>/pair_<p>/{predictions.csv, meta_<k>.csv}`.
pub fn write_pair_artifacts(
    output_dir: &Path,
    dataset: &str,
    pair: usize,
    test_indices: &[usize],
    outcome: &PairOutcome,
) -> Result<()> {
    let dir = output_dir.join(dataset).join(format!("pair_{pair}"));
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let path = dir.join("predictions.csv");
    let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(&path, e);
    writeln!(
        w,
        "index,truth,sum_label,sum_score,res_label,res_score,res_kept,res_fallback,mv_label,mv_score"
    )
    .map_err(io)?;
    let cell = |o: Option<MethodOutput>| match o {
        Some(o) => format!("{},{}", o.label, o.score),
        None => ",".to_string(),
    };
    for (idx, p) in test_indices.iter().zip(&outcome.predictions) {
        writeln!(
            w,
            "{idx},{},{},{},{},{},{}",
            p.truth,
            cell(p.sum),
            cell(p.res),
            p.kept.map(|k| k.to_string()).unwrap_or_default(),
            p.fallback.map(|b| b.to_string()).unwrap_or_default(),
            cell(p.mv)
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)?;
    let metas = outcome.ensemble.iter().flat_map(|e| &e.meta_datasets);
    for meta in metas {
        meta.save_csv(dir.join(format!("meta_{}.csv", meta.classifier_index)))?;
    }
    Ok(())
}
