//! Defect prediction from historical version sequences of metrics.

pub mod baselines;
pub mod dataset;
pub mod effort_eval;
pub mod error;
pub mod experiment;
pub mod history;
pub mod model_io;
pub mod rnn;
pub mod stats;
pub mod synthetic;

pub use error::{Error, Result};
