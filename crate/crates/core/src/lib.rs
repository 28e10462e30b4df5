//! Simulation and inference for the frequency of a periodic signal modulated by
//! an Ornstein–Uhlenbeck process and observed in small white noise.

pub mod cli;
pub mod error;
pub mod estimators;
pub mod filter;
pub mod inference;
pub mod io;
pub mod montecarlo;
pub mod quadrature;
pub mod signal;
pub mod simulator;

pub use error::{Error, Result};
pub use signal::SignalSpec;
pub use simulator::{simulate, ModelConfig, Observations, SamplePath};
