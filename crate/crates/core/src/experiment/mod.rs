//! Dataset ingestion, per-setup preprocessing, hyperparameter search and
//! reporting.

mod dataset;
mod hpo;
mod report;
mod setup;

pub use dataset::{load_sider_csv, DatasetTable, LoadOptions, RowIssue, SIDER_COLUMNS};
pub use hpo::{
    hidden_grid, model_config, resolve_tasks, run_hpo, run_seed, sample_configs, train_setup,
    train_task, Budget, HpoSpec, RunRecord, TopKScope, TrainedSetup,
};
pub use report::{companion_paths, summarize, CandidateScore, RunReport, Summary, TaskStat};
pub use setup::{prepare_setup, AugmentSpec, Prepared, Representation, Sample, TaskData};

use crate::model::ModelError;
use crate::train::TrainError;

/// Environment variable capping worker threads.
pub const WORKERS_ENV: &str = "MOLSEQ_WORKERS";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExperimentError {
    #[error("{0}")]
    Io(String),
    #[error("CSV: {0}")]
    Csv(String),
    #[error("dataset file has no data rows")]
    EmptyFile,
    #[error("expected {SIDER_COLUMNS} columns, found {got} ({})", if *row == 0 { "header".to_string() } else { format!("row {row}") })]
    ColumnCount { row: usize, got: usize },
    #[error("row {row}, column '{column}': label '{value}' is not 0 or 1")]
    Label {
        row: usize,
        column: String,
        value: String,
    },
    #[error("{} rows have unparseable SMILES (first: row {}: {}); enable skip-invalid to drop them", .0.len(), .0[0].row, .0[0].reason)]
    InvalidRows(Vec<RowIssue>),
    #[error("row {row} ({smiles}): {reason}")]
    Molecule {
        row: usize,
        smiles: String,
        reason: String,
    },
    #[error("{0}")]
    Pipeline(String),
    #[error("leakage guard: {0}")]
    Leakage(String),
    #[error("{0}")]
    Config(String),
    #[error("no task has a two-class test split")]
    NoTasks,
    #[error("every configuration failed: {}", .0.join("; "))]
    AllFailed(Vec<String>),
    #[error("report JSON: {0}")]
    Json(String),
    #[error("inconsistent report: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Worker count requested through [`WORKERS_ENV`], if set to a positive
/// integer.
pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV)
        .ok()?
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
}
