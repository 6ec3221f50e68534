//! Kinematic execution of plans and seeded Monte-Carlo experiments.

mod experiment;
mod export;
mod sim;

pub use experiment::{
    run_experiment, summarize, summarize_rows, CellSummary, ExperimentReport, ExperimentSpec,
    Skip, TMaxPolicy, TrialResult,
};
pub use export::{
    read_results_csv, write_ns_series_csv, write_results_csv, write_summary_csv, ResultRow,
    RESULTS_COLUMNS, SUMMARY_COLUMNS,
};
pub use sim::{advance, execute, SimFile, SimResult};
