use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use res_core::error::{Error, Result};
use res_core::harness::{
    emit_dataset_plot, emit_report, emit_sigma_plot, run_experiment, ExperimentConfig, ReportFormat, ResultsTable,
};
use res_core::relearn::SecondLevelDataset;

#[derive(Parser)]
#[command(name = "res", version, about = "Relearning ensemble selection benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the 5x2 CV benchmark described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Plot one member's σ-features from a finished run.
    PlotSigma {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        member: usize,
        /// Dataset name; defaults to the first one in the run.
        #[arg(long)]
        dataset: Option<String>,
        #[arg(long, default_value_t = 0)]
        pair: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plot every two-dimensional dataset in a config.
    PlotDataset {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Re-emit the results of a finished run.
    Report {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, default_value = "markdown")]
        format: ReportFormat,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run { config, output } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(dir) = output {
                cfg.output_dir = dir;
            }
            let results = run_experiment(&cfg)?;
            for format in [ReportFormat::Json, ReportFormat::Csv, ReportFormat::Markdown] {
                emit_report(&results, format, &cfg.output_dir)?;
            }
            print!("{}", res_core::harness::report::markdown(&results));
            if let Some(failed) = results.datasets.iter().find(|d| d.error.is_some()) {
                return Err(Error::Input(format!(
                    "dataset {} failed: {}",
                    failed.name,
                    failed.error.as_deref().unwrap_or_default()
                )));
            }
            Ok(())
        }
        Command::PlotSigma {
            run,
            member,
            dataset,
            pair,
            out,
        } => {
            let dataset = match dataset {
                Some(d) => d,
                None => {
                    let results = ResultsTable::load(run.join("results.json"))?;
                    results
                        .datasets
                        .first()
                        .map(|d| d.name.clone())
                        .ok_or_else(|| Error::Input("run has no datasets".into()))?
                }
            };
            let dir = run.join(&dataset).join(format!("pair_{pair}"));
            let meta = SecondLevelDataset::load_csv(dir.join(format!("meta_{member}.csv")), member)?;
            let out = out.unwrap_or_else(|| dir.join(format!("sigma_{member}.svg")));
            emit_sigma_plot(&meta, &out)?;
            println!("{}", out.display());
            Ok(())
        }
        Command::PlotDataset { config, out_dir } => {
            let cfg = ExperimentConfig::load(&config)?;
            let dir = out_dir.unwrap_or(cfg.output_dir.clone());
            for spec in &cfg.datasets {
                let ds = spec.load()?;
                if ds.dim() != 2 {
                    log::warn!("skipping {}: {} features", ds.name(), ds.dim());
                    continue;
                }
                let out = dir.join(format!("{}.svg", ds.name()));
                emit_dataset_plot(&ds, &out)?;
                println!("{}", out.display());
            }
            Ok(())
        }
        Command::Report { run, format } => {
            let results = ResultsTable::load(run.join("results.json"))?;
            for path in emit_report(&results, format, &run)? {
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}
