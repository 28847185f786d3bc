//! Baselines, metrics and experiment harness.

pub mod dtw;
pub mod harness;
pub mod metrics;

pub use dtw::{dtw_distance, knn_dtw_classify, DtwConfig};
pub use harness::{
    fit_and_score, run_accuracy, run_data_efficiency, run_out_distribution, write_rows_csv, CellMetrics,
    DtwSettings, EfficiencyCurve, Method, MetricsReport, NlsSettings, OutDistOptions, OutDistReport, RunRow,
};
pub use metrics::{average_ranks, per_class_error, MethodSummary, ResultTable};
