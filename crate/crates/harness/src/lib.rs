//! Experiment harness: dataset ingestion and validation, seeded sampling,
//! label corruption, F1 metrics, and repeated-trial orchestration.

pub mod dataset;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod results;
pub mod sampling;

pub use dataset::{dataset_paths, load_dataset, read_dataset, load_labels, Dataset, GroundTruth, LabelOptions, StatsReport};
pub use error::{Error, ErrorKind, Result};
pub use experiment::{
    corruption_sweep, fit_method, roc_sweep, run_experiment, trial_seeds, Aggregate,
    ExperimentResult, MethodSpec, RocPoint, SamplingSpec, SweepPoint, TrialOptions, TrialResult,
};
pub use metrics::{mean_std, micro_macro_f1, micro_macro_f1_single};
pub use results::{Report, SCHEMA_VERSION};
pub use sampling::{class_balanced_sample, corrupt_labels, uniform_sample};
