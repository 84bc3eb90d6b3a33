//! Metrics, evaluation reports and diagnostic exports.

pub mod ablation;
pub mod analyze;
pub mod metrics;
pub mod report;

pub use ablation::{run_ablation, write_history, AblationOutcome};
pub use analyze::write_analysis;
pub use metrics::{average_precision, f1_at_threshold, roc_auc};
pub use report::{evaluate, MetricsReport, SampleScore};
