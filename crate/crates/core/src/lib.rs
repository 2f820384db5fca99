//! Small dense and LSTM regression networks with Laplace aleatoric uncertainty
//! for short monthly series, evaluated by rejecting low-confidence forecasts.
//!
//! - [`nn`]: dense layers, the LSTM cell, a gradient tape and Adam.
//! - [`aleatoric`]: Laplace likelihood, its negative log-likelihood loss and the `ELU + 1` scale transform.
//! - [`data`]: synthetic series, `π₁` features, splits, CSV files and k-means.
//! - [`models`]: the forecaster zoo, baselines, training and checkpoints.
//! - [`eval`]: error-versus-keep curves and fixed-keep readouts.
//!
//! Inner loops run on rayon when the `parallel` feature is on (default);
//! [`ExecMode`] selects sequential execution at run time. Both produce
//! bit-identical results.

pub mod aleatoric;
pub mod data;
pub mod error;
pub mod eval;
pub mod exec;
pub mod models;
pub mod nn;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use exec::ExecMode;
