//! Point, homoscedastic, heteroscedastic and MC-dropout forecasters over dense
//! or LSTM backbones, trivial baselines, and the training loop.

mod baselines;
mod checkpoint;
mod network;
mod scoring;
mod spec;
mod train;

pub use baselines::{baseline_predict, input_variance_score, BaselineKind};
pub use checkpoint::{Architecture, Checkpoint, CHECKPOINT_SCHEMA_VERSION};
pub use network::{build, Dropout, ForwardVars, Model, Prediction, Scaler};
pub use scoring::{
    baseline_records, model_outputs, records_with_score, McConfig, ModelOutput, PredictionRecord, ScoreKind,
};
pub use spec::{
    Backbone, ModelSpec, Uncertainty, DEFAULT_DROPOUT, DESK_DENSE, DESK_LSTM, DESK_LSTM_HEAD, FULL_DENSE, FULL_LSTM,
    FULL_LSTM_HEAD,
};
pub use train::{evaluate_loss, train, EpochLoss, History, TrainConfig, TrainOutcome};
