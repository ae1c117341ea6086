//! Simulation harness: ground-truth generation, serial observation patterns
//! at a target pairwise missingness, the mean-fill baseline, evaluation
//! metrics and the replicate runner.

pub mod experiment;
pub mod generate;
pub mod metrics;

pub use experiment::{
    run_experiment, summarize, ExperimentConfig, ExperimentOutput, ExperimentRecord, Method, MetricSummary,
};
pub use generate::{build_pattern, generate_ground_truth, sffa_baseline, simulate_data, GroundTruth};
pub use metrics::{completion_accuracy, component_risks, correlation_risk, trace_r2, PairSelection};
