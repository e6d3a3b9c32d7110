use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{generate_synthetic, load_csv, CsvSchema, Dataset, SyntheticParams};
use crate::error::{Error, Result};
use crate::res::Polarity;
use crate::svm::{GammaRule, GridCriterion, SvmConfig, SvmSearch, PAPER_C_GRID};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "SUM")]
    Sum,
    #[serde(rename = "RES")]
    Res,
    #[serde(rename = "MV")]
    Mv,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Sum, Method::Res, Method::Mv];

    pub fn name(self) -> &'static str {
        match self {
            Method::Sum => "SUM",
            Method::Res => "RES",
            Method::Mv => "MV",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Where second-level training objects come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationMode {
    /// The training fold itself.
    #[default]
    Resubstitution,
    /// A stratified fraction held out of the training fold; the pool is
    /// trained on the remainder.
    Holdout(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Cancer,
    Bupa,
    Pima,
}

impl Preset {
    pub fn schema(self) -> CsvSchema {
        match self {
            Preset::Cancer => CsvSchema::breast_cancer(),
            Preset::Bupa => CsvSchema::bupa(),
            Preset::Pima => CsvSchema::pima(),
        }
    }
}

/// One dataset entry: either `synthetic` parameters or a `csv` path with a
/// `preset` or explicit `schema`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<CsvSchema>,
    #[serde(default)]
    pub drop_missing: bool,
}

impl DatasetSpec {
    pub fn synthetic(name: &str, params: SyntheticParams) -> Self {
        Self {
            name: name.into(),
            synthetic: Some(params),
            csv: None,
            preset: None,
            schema: None,
            drop_missing: false,
        }
    }

    pub fn preset(name: &str, path: impl Into<PathBuf>, preset: Preset) -> Self {
        Self {
            name: name.into(),
            synthetic: None,
            csv: Some(path.into()),
            preset: Some(preset),
            schema: None,
            drop_missing: false,
        }
    }

    pub fn load(&self) -> Result<Dataset> {
        match (&self.synthetic, &self.csv) {
            (Some(params), None) => {
                let ds = generate_synthetic(params)?;
                Dataset::new(self.name.clone(), ds.samples().to_vec())
            }
            (None, Some(path)) => {
                let mut schema = match (&self.schema, self.preset) {
                    (Some(s), None) => s.clone(),
                    (None, Some(p)) => p.schema(),
                    (None, None) => {
                        return Err(Error::Config(format!(
                            "dataset {}: csv needs a preset or a schema",
                            self.name
                        )))
                    }
                    (Some(_), Some(_)) => {
                        return Err(Error::Config(format!(
                            "dataset {}: give either a preset or a schema, not both",
                            self.name
                        )))
                    }
                };
                schema.drop_missing |= self.drop_missing;
                load_csv(path, &schema, &self.name)
            }
            _ => Err(Error::Config(format!(
                "dataset {}: exactly one of `synthetic` and `csv` is required",
                self.name
            ))),
        }
    }
}

/// Full benchmark description, read from a flat JSON document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetSpec>,
    /// Pool size.
    pub k: usize,
    pub c_grid: Vec<f64>,
    pub gamma: GammaRule,
    pub grid_criterion: GridCriterion,
    pub tol: f64,
    pub cv_seed: u64,
    pub pool_seed: u64,
    pub validation: ValidationMode,
    pub polarity: Polarity,
    pub methods: Vec<Method>,
    pub output_dir: PathBuf,
    /// Upper bound on the validation objects used to build meta-datasets.
    pub max_validation_for_relearning: Option<usize>,
    /// Write per-fold predictions and meta-datasets under `output_dir`.
    pub write_artifacts: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            datasets: vec![DatasetSpec::synthetic("Syn", SyntheticParams::default())],
            k: 11,
            c_grid: PAPER_C_GRID.to_vec(),
            gamma: GammaRule::Scale,
            grid_criterion: GridCriterion::TwoFoldAccuracy,
            tol: 1e-3,
            cv_seed: 1,
            pool_seed: 2,
            validation: ValidationMode::Resubstitution,
            polarity: Polarity::PredictedCorrect,
            methods: Method::ALL.to_vec(),
            output_dir: PathBuf::from("runs/latest"),
            max_validation_for_relearning: None,
            write_artifacts: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.c_grid.is_empty() {
            return Err(Error::Config("c_grid must not be empty".into()));
        }
        if self.c_grid.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::Config("c_grid values must be positive".into()));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::Config("tol must be positive".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("methods must not be empty".into()));
        }
        if let ValidationMode::Holdout(f) = self.validation {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Config(format!("holdout fraction {f} not in (0, 1)")));
            }
        }
        if self.max_validation_for_relearning == Some(0) {
            return Err(Error::Config("max_validation_for_relearning must be positive".into()));
        }
        Ok(())
    }

    pub fn runs(&self, method: Method) -> bool {
        self.methods.contains(&method)
    }

    /// Hyperparameter search used at both ensemble levels.
    pub fn search(&self) -> SvmSearch {
        SvmSearch {
            c_grid: self.c_grid.clone(),
            gamma: self.gamma,
            criterion: self.grid_criterion,
            template: SvmConfig {
                tol: self.tol,
                ..SvmConfig::default()
            },
        }
    }

    /// The four datasets of the benchmark, with files under `data_dir`.
    pub fn paper(data_dir: impl AsRef<Path>) -> Self {
        let dir = data_dir.as_ref();
        Self {
            datasets: vec![
                DatasetSpec::preset("Cancer", dir.join("breast-cancer-wisconsin.data"), Preset::Cancer),
                DatasetSpec::preset("Bupa", dir.join("bupa.data"), Preset::Bupa),
                DatasetSpec::preset("Pima", dir.join("pima-indians-diabetes.data"), Preset::Pima),
                DatasetSpec::synthetic("Syn", SyntheticParams::default()),
            ],
            ..Self::default()
        }
    }
}
