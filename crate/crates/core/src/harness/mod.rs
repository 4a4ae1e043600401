//! Viscosity-ladder experiments: configs, persistence, resume and checks.

pub mod config;
pub mod ladder;
pub mod manifest;
pub mod store;

pub use config::{
    config_diff, ExperimentConfig, GridBudget, ModeKind, ResolvedExperiment, SolverTemplate, TrendConfig, DEFAULT_LADDER,
    WORKERS_ENV,
};
pub use ladder::{
    assess, check, ladder_bound, resume, run_ladder, AcceptanceFlags, CheckReport, ExperimentReport, RunFailure,
    TrendFits, LADDER_FILE, REPORT_FILE,
};
pub use manifest::{Manifest, MANIFEST_FILE};
pub use store::{RunStatus, RunSummary};
