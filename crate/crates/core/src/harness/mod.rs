//! Configuration, experiment orchestration and report emission.

mod catalog;
mod config;
mod experiment;
pub mod report;

pub use catalog::{describe, list_experiments, lookup, CatalogEntry};
pub use config::{
    parse_config, parse_config_str, AuditConfig, ExhaustionConfig, ExperimentConfig, GridConfig, InitialData,
    OutputConfig,
};
pub use experiment::{
    audit_stored, build_background, build_report, initial_metric, load_snapshots, run_convergence, run_experiment,
    RunOutcome,
};
