//! Task-success checks and paired PSW / IW experiments.

pub mod experiment;
pub mod success;

pub use experiment::{
    run_experiment, trial_seed, ExperimentConfig, ExperimentReport, Method, MethodSummary, ModelBundle, PreparedDemo, TestSet,
    TrialRecord,
};
pub use success::{check_success, keypoint_transfer_error, transfer_keypoints, SuccessCheck};
