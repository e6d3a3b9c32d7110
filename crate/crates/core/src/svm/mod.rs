//! Soft-margin RBF support vector machine.
//!
//! Inputs are z-scored with statistics learned from the training data; the
//! scaler travels with the model. [`TrainedSvm`] keeps the solver state of a
//! fit so the same problem can be relearned with one extra labelled point
//! without starting over.

mod grid;
mod solver;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Label, DEFAULT_TIE};
use crate::error::{check_dim, Error, Result};
use solver::{BorderedGram, DenseGram, SolverParams};

pub use grid::{grid_search_c, GridCriterion, PAPER_C_GRID};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    /// Regularization constant.
    pub c: f64,
    /// RBF width in `exp(−γ‖x − z‖²)`, applied to standardized inputs.
    pub gamma: f64,
    /// KKT tolerance; also the solver's stopping threshold.
    pub tol: f64,
    pub max_iter: usize,
    /// Seeds the internal fold assignment when this config drives a grid search.
    pub seed: u64,
    /// Label returned by [`predict`] when the score is exactly zero.
    pub tie: Label,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: 1.0,
            tol: 1e-3,
            max_iter: 10_000_000,
            seed: 0,
            tie: DEFAULT_TIE,
        }
    }
}

impl SvmConfig {
    pub fn new(c: f64, gamma: f64) -> Self {
        Self {
            c,
            gamma,
            ..Self::default()
        }
    }

    pub fn with_c(&self, c: f64) -> Self {
        Self { c, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.c) {
            return Err(Error::Parameter(format!("C must be positive, got {}", self.c)));
        }
        if !positive(self.gamma) {
            return Err(Error::Parameter(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !positive(self.tol) {
            return Err(Error::Parameter(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

/// How the RBF width is chosen for a training set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GammaRepr", into = "GammaRepr")]
pub enum GammaRule {
    /// `1 / (d · Var)` of the standardized training features.
    #[default]
    Scale,
    Value(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum GammaRepr {
    Name(String),
    Value(f64),
}

impl TryFrom<GammaRepr> for GammaRule {
    type Error = String;

    fn try_from(repr: GammaRepr) -> std::result::Result<Self, String> {
        match repr {
            GammaRepr::Name(s) if s == "scale" => Ok(GammaRule::Scale),
            GammaRepr::Name(s) => Err(format!("unknown gamma rule {s:?}")),
            GammaRepr::Value(v) if v.is_finite() && v > 0.0 => Ok(GammaRule::Value(v)),
            GammaRepr::Value(v) => Err(format!("gamma must be positive, got {v}")),
        }
    }
}

impl From<GammaRule> for GammaRepr {
    fn from(rule: GammaRule) -> Self {
        match rule {
            GammaRule::Scale => GammaRepr::Name("scale".into()),
            GammaRule::Value(v) => GammaRepr::Value(v),
        }
    }
}

impl GammaRule {
    pub fn resolve(&self, data: &Dataset) -> f64 {
        match *self {
            GammaRule::Value(v) => v,
            GammaRule::Scale => {
                let scaler = Standardizer::fit(data);
                let mut sum = 0.0;
                let mut sum_sq = 0.0;
                let mut count = 0.0;
                for s in data.samples() {
                    for z in scaler.apply(&s.features) {
                        sum += z;
                        sum_sq += z * z;
                        count += 1.0;
                    }
                }
                let var = sum_sq / count - (sum / count).powi(2);
                if var > 1e-12 {
                    1.0 / (data.dim() as f64 * var)
                } else {
                    1.0
                }
            }
        }
    }
}

/// Per-feature z-scoring. Constant columns keep a unit deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(data: &Dataset) -> Self {
        let d = data.dim();
        let n = data.len() as f64;
        let mut mean = vec![0.0; d];
        for s in data.samples() {
            for (m, x) in mean.iter_mut().zip(&s.features) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for s in data.samples() {
            for ((v, x), m) in var.iter_mut().zip(&s.features).zip(&mean) {
                *v += (x - m).powi(2);
            }
        }
        let std = var
            .into_iter()
            .map(|v| {
                let sd = (v / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// Largest `f64` below one; keeps squashed scores strictly inside `(−1, 1)`.
const MAX_SCORE: f64 = 1.0 - f64::EPSILON / 2.0;

/// Maps a decision value into `(−1, 1)` with `tanh`, preserving its sign.
pub fn squash(decision: f64) -> f64 {
    decision.tanh().clamp(-MAX_SCORE, MAX_SCORE)
}

pub(crate) fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

/// A trained kernel machine: `f(x) = Σ αᵢyᵢK(svᵢ, z(x)) + b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    /// Support vectors in standardized coordinates.
    pub support_vectors: Vec<Vec<f64>>,
    pub alphas: Vec<f64>,
    pub labels: Vec<Label>,
    pub bias: f64,
    pub config: SvmConfig,
    pub standardizer: Standardizer,
}

impl SvmModel {
    pub fn dim(&self) -> usize {
        self.standardizer.dim()
    }

    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("probe has non-finite features".into()));
        }
        let z = self.standardizer.apply(x);
        Ok(self.decision_standardized(&z))
    }

    fn decision_standardized(&self, z: &[f64]) -> f64 {
        let gamma = self.config.gamma;
        self.support_vectors
            .iter()
            .zip(self.alphas.iter().zip(&self.labels))
            .map(|(sv, (a, y))| a * y.sign() * rbf(sv, z, gamma))
            .sum::<f64>()
            + self.bias
    }

    /// `tanh` of the decision value; in `(−1, 1)` with the same sign.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        self.decision_value(x).map(squash)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        Ok(Label::from_score(self.score(x)?, self.config.tie))
    }
}

pub fn decision_value(model: &SvmModel, x: &[f64]) -> Result<f64> {
    model.decision_value(x)
}

pub fn score(model: &SvmModel, x: &[f64]) -> Result<f64> {
    model.score(x)
}

pub fn predict(model: &SvmModel, x: &[f64]) -> Result<Label> {
    model.predict(x)
}

/// A fitted model together with the kernel matrix and dual state it came from.
#[derive(Clone, Debug)]
pub struct TrainedSvm {
    model: SvmModel,
    points: Vec<Vec<f64>>,
    y: Vec<f64>,
    gram: DenseGram,
    alpha: Vec<f64>,
    grad: Vec<f64>,
    iterations: usize,
}

impl TrainedSvm {
    /// Fits the scaler on `data`, then trains.
    pub fn fit(data: &Dataset, config: &SvmConfig) -> Result<Self> {
        let scaler = Standardizer::fit(data);
        Self::fit_with_standardizer(data, config, scaler)
    }

    /// Trains on `data` using a fixed scaler.
    pub fn fit_with_standardizer(data: &Dataset, config: &SvmConfig, standardizer: Standardizer) -> Result<Self> {
        config.validate()?;
        data.ensure_both_classes()?;
        check_dim(standardizer.dim(), data.dim())?;
        let points: Vec<Vec<f64>> = data.samples().iter().map(|s| standardizer.apply(&s.features)).collect();
        let y: Vec<f64> = data.labels().map(Label::sign).collect();
        let gram = DenseGram::rbf(&points, config.gamma);
        let n = y.len();
        let sol = solver::solve(&gram, &y, &solver_params(config), vec![0.0; n], vec![-1.0; n])?;
        let model = assemble(&points, &y, &sol.alpha, sol.bias, config, standardizer);
        Ok(Self {
            model,
            points,
            y,
            gram,
            alpha: sol.alpha,
            grad: sol.grad,
            iterations: sol.iterations,
        })
    }

    pub fn model(&self) -> &SvmModel {
        &self.model
    }

    pub fn into_model(self) -> SvmModel {
        self.model
    }

    pub fn config(&self) -> &SvmConfig {
        &self.model.config
    }

    /// Dual coefficients for every training point, in training order.
    pub fn alphas(&self) -> &[f64] {
        &self.alpha
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn n_train(&self) -> usize {
        self.y.len()
    }

    /// Retrains on the training set plus `(x, label)` and returns the new
    /// model's score at `x`. Same config and scaler; the solver resumes from
    /// this fit with the new point's coefficient at zero.
    pub fn relearned_score(&self, x: &[f64], label: Label) -> Result<f64> {
        let (z, gram, sol) = self.relearn_solution(x, label)?;
        let n = self.y.len();
        let mut f = sol.bias + sol.alpha[n] * label.sign() * gram.corner;
        for j in 0..n {
            f += sol.alpha[j] * self.y[j] * gram.border[j];
        }
        debug_assert_eq!(z.len(), self.model.dim());
        Ok(squash(f))
    }

    /// Like [`relearned_score`](Self::relearned_score) but returns the full model.
    pub fn relearn(&self, x: &[f64], label: Label) -> Result<SvmModel> {
        let (z, _, sol) = self.relearn_solution(x, label)?;
        let mut points = self.points.clone();
        points.push(z);
        let mut y = self.y.clone();
        y.push(label.sign());
        Ok(assemble(
            &points,
            &y,
            &sol.alpha,
            sol.bias,
            &self.model.config,
            self.model.standardizer.clone(),
        ))
    }

    fn relearn_solution(&self, x: &[f64], label: Label) -> Result<(Vec<f64>, BorderedGram<'_>, solver::Solution)> {
        check_dim(self.model.dim(), x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("probe has non-finite features".into()));
        }
        let gamma = self.model.config.gamma;
        let z = self.model.standardizer.apply(x);
        let border: Vec<f64> = self.points.iter().map(|p| rbf(p, &z, gamma)).collect();
        let gram = BorderedGram {
            base: &self.gram,
            border,
            corner: 1.0,
        };
        let yn = label.sign();
        let mut y = self.y.clone();
        y.push(yn);
        let mut alpha = self.alpha.clone();
        alpha.push(0.0);
        let mut grad = self.grad.clone();
        let wx: f64 = self
            .alpha
            .iter()
            .zip(&self.y)
            .zip(&gram.border)
            .map(|((a, y), k)| a * y * k)
            .sum();
        grad.push(yn * wx - 1.0);
        let sol = solver::solve(&gram, &y, &solver_params(&self.model.config), alpha, grad)?;
        Ok((z, gram, sol))
    }
}

fn solver_params(config: &SvmConfig) -> SolverParams {
    SolverParams {
        c: config.c,
        eps: config.tol,
        max_iter: config.max_iter,
    }
}

fn assemble(
    points: &[Vec<f64>],
    y: &[f64],
    alpha: &[f64],
    bias: f64,
    config: &SvmConfig,
    standardizer: Standardizer,
) -> SvmModel {
    let mut model = SvmModel {
        support_vectors: Vec::new(),
        alphas: Vec::new(),
        labels: Vec::new(),
        bias,
        config: config.clone(),
        standardizer,
    };
    for ((p, &yi), &a) in points.iter().zip(y).zip(alpha) {
        if a > 0.0 {
            model.support_vectors.push(p.clone());
            model.alphas.push(a);
            model
                .labels
                .push(if yi > 0.0 { Label::Positive } else { Label::Negative });
        }
    }
    model
}

/// How a level of the ensemble picks its SVM hyperparameters: gamma from a
/// rule, C by grid search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmSearch {
    pub c_grid: Vec<f64>,
    pub gamma: GammaRule,
    pub criterion: GridCriterion,
    /// Carries `tol`, `max_iter` and `tie`; `c` and `gamma` are overwritten.
    pub template: SvmConfig,
}

impl Default for SvmSearch {
    fn default() -> Self {
        Self {
            c_grid: PAPER_C_GRID.to_vec(),
            gamma: GammaRule::Scale,
            criterion: GridCriterion::TwoFoldAccuracy,
            template: SvmConfig::default(),
        }
    }
}

impl SvmSearch {
    /// Resolves gamma on `data` and grid-searches C; `seed` drives the inner split.
    pub fn tune(&self, data: &Dataset, seed: u64, counter: &crate::counter::TrainingCounter) -> Result<SvmConfig> {
        let gamma = self.gamma.resolve(data);
        let template = SvmConfig {
            gamma,
            seed,
            ..self.template.clone()
        };
        let c = grid_search_c(data, &self.c_grid, &template, self.criterion, seed, counter)?;
        Ok(template.with_c(c))
    }
}

pub fn train_svm(data: &Dataset, config: &SvmConfig) -> Result<SvmModel> {
    TrainedSvm::fit(data, config).map(TrainedSvm::into_model)
}
