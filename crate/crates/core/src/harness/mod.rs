//! Experiment orchestration: configuration, seeded trials, aggregation and
//! CSV output.

pub mod checks;
pub mod config;
pub mod csv;
pub mod experiments;
pub mod metrics;

pub use config::{ExperimentConfig, ExperimentKind, KHatMode};
pub use csv::{csv_string, emit_csv};
pub use experiments::{
    run_convergence_experiment, run_detection_experiment, run_experiment, run_kestimation_experiment,
    run_protocol_experiment, trial_rng, ConvergenceSummary, EstimationSummary, MetricsRecord, RunOptions,
    VariantSummary,
};
pub use metrics::{mdp_at_fap, mean_se, paired_one_sided, AveragedRoc};
