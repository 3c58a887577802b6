//! Experiment orchestration: pools, adjudication sweeps over methods and
//! budgets, significance testing of the full and the reduced judgments,
//! agreement scoring, repetition averaging, and report emission.

pub mod config;
pub mod experiment;
pub mod report;

pub use config::{ConfigFile, ExperimentConfig};
pub use experiment::{
    budget_fraction, run_experiment, split_pooled_nonpooled, CellAggregate, ExperimentResult,
    GoldSummary, MaTable, MeasureAggregate, MeasureReport, RepetitionRecord, Stat,
};
pub use report::write_reports;
