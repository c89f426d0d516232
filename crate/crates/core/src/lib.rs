//! Time-frequency co-movement analysis with the Morlet wavelet: coherence,
//! phase difference, the real wavelet correlation and weighted cohesion
//! (fixed or time-varying weights), with Monte Carlo significance and
//! bootstrap phase intervals.

pub mod cli;
pub mod cohesion;
pub mod comovement;
pub mod cwt;
pub mod error;
pub mod exec;
pub mod export;
pub mod matrix;
pub mod significance;
pub mod synth;
pub mod timeseries;

pub use error::{Error, ErrorClass, Result};
pub use matrix::Matrix;
