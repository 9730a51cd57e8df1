//! Spin-bath decoherence: the decoherence factor `r(t)` as a product over
//! environmental spins, exact recurrence-time analysis for rational couplings,
//! a full-state brute-force oracle for small environments, and the run
//! pipeline behind the `spinbath` command-line tool.

pub mod config;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod recurrence;
pub mod run;
pub mod sampling;

pub use error::{Error, Result};
pub use model::{
    derive_beta_sq, EnvironmentParticle, EnvironmentRealization, GroupBoundary, ObservableSpec, SystemCoefficients,
    TimeGrid, TimeSeries,
};
