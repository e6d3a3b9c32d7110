use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::Method;
use super::experiment::ResultsTable;
use crate::error::{Error, Result};
use crate::metrics::Metric;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            "md" | "markdown" => Ok(Self::Markdown),
            other => Err(Error::Config(format!("unknown report format `{other}`"))),
        }
    }
}

const DECIMALS: usize = 4;

/// Mean metrics, one row per (dataset, method). Datasets that failed get a
/// single row carrying the error text.
pub fn summary_csv(results: &ResultsTable) -> String {
    let mut out = String::from("dataset,method,AUC,G,F1,MCC,error\n");
    for ds in &results.datasets {
        if let Some(err) = &ds.error {
            let _ = writeln!(out, "{},,,,,,\"{}\"", ds.name, err.replace('"', "'"));
            continue;
        }
        for m in &ds.methods {
            let _ = write!(out, "{},{}", ds.name, m.method);
            for metric in Metric::ALL {
                let _ = write!(out, ",{:.*}", DECIMALS, m.mean.get(metric));
            }
            out.push_str(",\n");
        }
    }
    out
}

/// Per-pair metrics and bookkeeping.
pub fn folds_csv(results: &ResultsTable) -> String {
    let mut out =
        String::from("dataset,method,pair,AUC,G,F1,MCC,c_base,validation_size,kept_fraction,fallback_rate,trainings\n");
    for ds in &results.datasets {
        for m in &ds.methods {
            for (p, (values, fold)) in m.per_fold.iter().zip(&ds.folds).enumerate() {
                let _ = write!(out, "{},{},{p}", ds.name, m.method);
                for metric in Metric::ALL {
                    let _ = write!(out, ",{:.*}", DECIMALS, values.get(metric));
                }
                let opt = |v: Option<f64>| v.map(|v| format!("{v:.DECIMALS$}")).unwrap_or_default();
                let _ = writeln!(
                    out,
                    ",{},{},{},{},{}",
                    fold.c_base,
                    fold.validation_size,
                    opt(fold.kept_fraction),
                    opt(fold.fallback_rate),
                    fold.counts.total()
                );
            }
        }
    }
    out
}

/// Markdown table with the best method per (dataset, metric) in bold.
pub fn markdown(results: &ResultsTable) -> String {
    let mut out = String::from("| Dataset | Method | AUC | G | F1 | MCC |\n|---|---|---|---|---|---|\n");
    for ds in &results.datasets {
        if let Some(err) = &ds.error {
            let _ = writeln!(out, "| {} | failed: {} | | | | |", ds.name, err);
            continue;
        }
        let best: Vec<f64> = Metric::ALL
            .iter()
            .map(|&metric| {
                ds.methods
                    .iter()
                    .map(|m| round(m.mean.get(metric)))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        for m in &ds.methods {
            let _ = write!(out, "| {} | {} |", ds.name, m.method);
            for (i, metric) in Metric::ALL.iter().enumerate() {
                let v = round(m.mean.get(*metric));
                if v == best[i] && ds.methods.len() > 1 {
                    let _ = write!(out, " **{v:.DECIMALS$}** |");
                } else {
                    let _ = write!(out, " {v:.DECIMALS$} |");
                }
            }
            out.push('\n');
        }
    }
    out
}

fn round(v: f64) -> f64 {
    let f = 10f64.powi(DECIMALS as i32);
    (v * f).round() / f
}

/// Writes the report in `format` under `dir` and returns the files written.
pub fn emit_report(results: &ResultsTable, format: ReportFormat, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files: Vec<(&str, String)> = match format {
        ReportFormat::Csv => vec![("results.csv", summary_csv(results)), ("folds.csv", folds_csv(results))],
        ReportFormat::Json => vec![("results.json", serde_json::to_string_pretty(results)? + "\n")],
        ReportFormat::Markdown => vec![("results.md", markdown(results))],
    };
    files
        .into_iter()
        .map(|(name, body)| {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
            Ok(path)
        })
        .collect()
}

/// Mean value of `metric` for `method` on `dataset`, if that run succeeded.
pub fn lookup(results: &ResultsTable, dataset: &str, method: Method, metric: Metric) -> Option<f64> {
    results.dataset(dataset)?.method(method).map(|m| m.mean.get(metric))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counter::TrainingCounts;
    use crate::harness::experiment::{DatasetResult, FoldRecord, MethodResult};
    use crate::metrics::MetricValues;

    fn table() -> ResultsTable {
        let v = |a| MetricValues {
            auc: a,
            gmean: 0.5,
            f1: 0.25,
            mcc: 0.1,
        };
        let fold = FoldRecord {
            pair: 0,
            train_size: 10,
            test_size: 10,
            validation_size: 10,
            c_base: 1.0,
            meta_degenerate: 0,
            kept_fraction: Some(0.5),
            fallback_rate: None,
            counts: TrainingCounts::default(),
            runtime_secs: 0.0,
        };
        ResultsTable {
            k: 3,
            cv_seed: 1,
            pool_seed: 2,
            datasets: vec![
                DatasetResult {
                    name: "A".into(),
                    n: 20,
                    d: 2,
                    error: None,
                    methods: vec![
                        MethodResult {
                            method: Method::Sum,
                            mean: v(0.8),
                            per_fold: vec![v(0.8)],
                        },
                        MethodResult {
                            method: Method::Res,
                            mean: v(0.9),
                            per_fold: vec![v(0.9)],
                        },
                    ],
                    folds: vec![fold],
                    runtime_secs: 1.0,
                },
                DatasetResult {
                    name: "B".into(),
                    n: 0,
                    d: 0,
                    error: Some("missing file".into()),
                    methods: vec![],
                    folds: vec![],
                    runtime_secs: 0.0,
                },
            ],
        }
    }

    #[test]
    fn csv_is_fixed_precision() {
        let csv = summary_csv(&table());
        assert!(csv.contains("A,SUM,0.8000,0.5000,0.2500,0.1000,\n"));
        assert!(csv.contains("B,,,,,,\"missing file\""));
        assert!(folds_csv(&table()).contains("A,RES,0,0.9000"));
    }

    #[test]
    fn markdown_bolds_best() {
        let md = markdown(&table());
        assert!(md.contains("| A | RES | **0.9000** |"));
        assert!(md.contains("| A | SUM | 0.8000 | **0.5000** |"));
    }

    #[test]
    fn json_roundtrips() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&table(), ReportFormat::Json, dir.path()).unwrap();
        assert_eq!(ResultsTable::load(&files[0]).unwrap(), table());
    }

    #[test]
    fn format_parsing() {
        assert_eq!("md".parse::<ReportFormat>().unwrap(), ReportFormat::Markdown);
        assert!("xml".parse::<ReportFormat>().is_err());
        assert_eq!(lookup(&table(), "A", Method::Res, Metric::Auc), Some(0.9));
        assert_eq!(lookup(&table(), "B", Method::Res, Metric::Auc), None);
    }
}
