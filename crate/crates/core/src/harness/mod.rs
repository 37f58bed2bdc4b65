//! The acquisition loop, its replication across seeds, and summary metrics.

mod metrics;
mod replicate;
mod run;
mod wilcoxon;

pub use metrics::{
    bias_and_std_curves, compute_metrics, relative_labeling_cost, squared_error_summaries, CostPoint, MetricsSummary,
    SeriesMetrics, SeriesTable, SquaredErrorSummary, StepMetrics, WilcoxonRow, LOG_FLOOR,
};
pub use replicate::{collect_series, replicate, ReplicateResult};
pub use run::{run_active_test, run_are, LabelOracle, RunContext, RunResult};
pub use wilcoxon::{wilcoxon_signed_rank, wilcoxon_signed_rank_with, WilcoxonResult, EXACT_MAX_N};
