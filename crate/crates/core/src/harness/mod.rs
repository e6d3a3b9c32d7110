//! Benchmark orchestration: configuration, the 5x2 CV runner, reports and plots.

pub mod config;
pub mod experiment;
pub mod plot;
pub mod report;

pub use config::{DatasetSpec, ExperimentConfig, Method, Preset, ValidationMode};
pub use experiment::{
    run_experiment, run_pair, DatasetResult, FoldRecord, MethodResult, PairOutcome, PairSettings, ResultsTable,
};
pub use plot::{emit_dataset_plot, emit_sigma_plot};
pub use report::{emit_report, ReportFormat};
