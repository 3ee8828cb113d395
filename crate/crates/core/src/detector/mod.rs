//! Phase II identity detection.

pub mod baseline;
pub mod decision;
pub mod likelihood;
pub mod nsgd;

pub use baseline::{infinite_adc_detect, infinite_adc_detect_traced};
pub use decision::{decide_activity, error_rates, roc, ErrorRates};
pub use likelihood::{DetectionModel, LikelihoodEval};
pub use nsgd::{
    nsgd_detect, run_nsgd, ActivityProblem, DetectionResult, NsgdConfig, NsgdOutcome,
    StepSchedule, StochasticAscent,
};
