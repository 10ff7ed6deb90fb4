//! Training loop, task losses, checkpoints and evaluation metrics.

mod config;
mod loss;
pub mod metrics;
mod model;
mod train;

pub use config::TrainConfig;
pub use loss::{task_loss, BCE_EPS};
pub use metrics::Correlation;
pub use model::{Checkpoint, Model, StoredTensor, CHECKPOINT_FORMAT};
pub use train::{
    embedding_correlation, evaluate, metric_name, run, task_metric, train, write_history, EpochRecord,
    MetricsReport, MetricsSummary, PlanAudit, RunResult, TrainOutcome, EXACT_PLAN_TOLERANCE, SINKHORN_PLAN_TOLERANCE,
};
