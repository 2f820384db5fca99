//! Minimal neural-network kernel: dense and LSTM layers, a gradient tape and Adam.

mod activation;
mod adam;
mod layers;
mod params;
mod tape;

pub use activation::{sigmoid, Activation};
pub use adam::{adam_step, AdamConfig, AdamState};
pub use layers::{dense_forward, lstm_cell_step, DenseLayer, DenseLayerParams, LstmCellParams, LstmLayer};
pub use params::{Gradients, Param, ParamId, ParamStore};
pub(crate) use tape::signum0;
pub use tape::{Tape, Var};
