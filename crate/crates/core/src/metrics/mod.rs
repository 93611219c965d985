//! Detection and classification scoring with bootstrap intervals.

pub mod bootstrap;
pub mod classification;
pub mod detection;
pub mod report;

pub use bootstrap::{bootstrap_ci, percentile, trial_band, Interval, TrialBand};
pub use classification::{macro_mean, roc_auc, ClassificationScene, ScoreLine};
pub use detection::{
    average_precision, mean_ap, ApMode, Detection, DetectionLine, DetectionScene, EmptyClassPolicy,
};
pub use report::{evaluate_classification, evaluate_detection, ClsEvalConfig, DetEvalConfig, EvalReport};
