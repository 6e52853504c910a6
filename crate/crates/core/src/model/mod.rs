//! Multi-view evidential classifier.

mod batch;
mod io;
mod loss;
mod network;
mod predict;
mod train;

pub use batch::{FeatureMatrix, MultiViewBatch};
pub use io::{read_model, write_model, FORMAT_VERSION, MAGIC};
pub use loss::{
    evaluate, expected_cross_entropy, expected_cross_entropy_grad, forward, label_masked, regularizer,
    regularizer_grad, LossBreakdown, LossReport, Objective, RegularizerKind, SampleOutput,
};
pub use network::{sigmoid, softplus, Architecture, Dense, MultiViewModel, ViewActivations, ViewNetwork};
pub use predict::{argmax, predict, Prediction};
pub use train::{total_loss, train, train_from, Adam, EpochMetrics, TrainConfig, TrainOutcome};
