//! Evolutionary dynamics and Brownian motion on the probability simplex,
//! built on the Aitchison geometry.

pub mod aitchison;
pub mod error;
pub mod jko;
pub mod payoff;
pub mod replicator;
pub mod sde;
pub mod stats;
pub mod suites;

pub use aitchison::{Composition, ContrastMatrix, IlrPoint, TangentVector};
pub use error::{Error, Result};
pub use payoff::PayoffMatrix;
pub use replicator::{OdeConfig, Trajectory};
pub use sde::{DriftKind, Ensemble, SdeConfig};
pub use stats::TestReport;
pub use suites::{Suite, SuiteConfig, SuiteReport};
