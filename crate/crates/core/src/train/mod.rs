//! Mini-batch training, evaluation, metrics and the trained-model file.

mod metrics;
mod model_file;
mod report;
mod trainer;

pub use metrics::{macro_f1, ClassMetrics, ConfusionMatrix};
pub use model_file::{TrainedModel, PARAMS_MAGIC, PARAMS_VERSION};
pub use report::{format_percent, MetricsReport};
pub use trainer::{
    check_compatible, confusion_for, evaluate, predict, train, EpochRecord, EpochStats, PreparedSplit, TrainConfig,
    TrainOutcome, Trainer,
};
