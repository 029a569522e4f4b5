//! Config-driven experiments: parameter sweeps over block counts and seeds,
//! trace comparison and bound reports.

pub mod bounds;
pub mod compare;
pub mod config;
pub mod problem;
pub mod run;

pub use bounds::{bound_reports, reports_csv, reports_text};
pub use compare::{compare_runs, features_to, iterations_to, Comparison};
pub use config::{ExperimentConfig, CONFIG_VERSION};
pub use problem::{build_problem, BuiltProblem};
pub use run::{run_experiment, RunOptions, RunSummary};
