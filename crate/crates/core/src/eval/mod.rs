//! Evaluation protocols, classification metrics and few-shot curves.

pub mod cv;
pub mod fewshot;
pub mod metrics;
pub mod split;

pub use cv::{cross_validate, evaluate_cross_dataset, metrics_row, run_fold, CvSummary, FoldResult, METRICS_HEADER};
pub use fewshot::{fewshot_curve, CurvePoint, CurveStat, FewShotCurve};
pub use metrics::{balanced_accuracy, mean_sd, pr_auc, roc_auc, MetricReport, DEFAULT_THRESHOLD};
pub use split::{make_split_plan, Protocol, SplitPlan};
