//! Multi-fidelity hyperparameter optimization with expert priors.
//!
//! HyperBand, ASHA and asynchronous HyperBand run on a deterministic
//! discrete-event simulator; prior-aware variants replace uniform sampling
//! with an ensemble of uniform, prior and incumbent-local sampling.

pub mod bench;
pub mod distributions;
pub mod error;
pub mod esp;
pub mod harness;
pub mod optimizer;
pub mod scheduler;
pub mod space;

pub use error::{Error, Result};
