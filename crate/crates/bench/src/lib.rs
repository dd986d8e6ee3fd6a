//! Replication harness for experience-replay variance studies, plus the
//! `replaystat` command-line front end.

pub mod cli;
pub mod config;
pub mod experiment;
pub mod report;
pub mod stats;

pub use config::{presets, Application, ExperimentConfig, KrrBaseline, Presets, WeightProfile};
pub use experiment::{run_experiment, run_experiment_with, RunOptions};
pub use report::{emit_report, read_report, ExperimentReport, SchemeSummary, Timing};
pub use stats::{summarize_boxplot, FiveNumber};
