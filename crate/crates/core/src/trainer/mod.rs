//! Parameter partitioning, optimization, few-shot sampling, evaluation and
//! the fusion training loop.

mod adam;
mod batch;
mod eval;
mod partition;
mod sampling;
mod train;

pub use adam::{Adam, BETA1, BETA2, EPSILON};
pub use batch::{batch_gradients, batch_gradients_with, NamedGradients};
pub use eval::{
    evaluate, predict_all, type_accuracy, Evaluation, Outcome, POSITIVE_ANSWER, SARCASM,
};
pub use partition::{partition_parameters, ParameterPartition};
pub use sampling::{sample_few_shot, FewShot};
pub use train::{train, EpochMetrics, TrainConfig, TrainReport};
