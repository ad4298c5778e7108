//! Confusion-matrix metrics, threshold curves, seed averaging and paired t-tests.
//!
//! Private is the positive class throughout. "Overall" figures are support-weighted
//! averages of the two per-class figures.

mod curves;
mod metrics;
mod report;
mod stats;

pub use curves::{breakeven, score_curves, Curve, CurvePoint};
pub use metrics::{confusion, metrics, threshold_predictions, weighted_f1, ClassMetrics, ConfusionMatrix, MetricsReport};
pub use report::{report_row, write_curve, write_report_table, REPORT_HEADER};
pub use stats::{average_over_seeds, paired_ttest, t_critical_05, SeedAverage, TTestResult};
