//! Executable checks for generalization bounds of uniformly stable learning
//! algorithms.
//!
//! The crate is split along the objects it verifies:
//!
//! * [`bounds`] evaluates the closed-form moment and deviation bounds.
//! * [`oracle`] computes exact and Monte Carlo `L_p` norms of functions of
//!   Rademacher signs.
//! * [`chaos`] builds the degree-two chaos family that attains the moment
//!   bound up to a logarithmic factor, and certifies its properties.
//! * [`partition`] materializes the nested dyadic partitions and the
//!   telescoping decomposition used in the upper-bound argument.
//! * [`stability_lab`] simulates stable learners on finite-support
//!   distributions and measures their generalization gaps.
//! * [`cli`] drives grid experiments from a JSON config and writes
//!   deterministic CSV/JSON reports.

pub mod bounds;
pub mod chaos;
pub mod cli;
pub mod error;
pub mod oracle;
pub mod partition;
pub mod stability_lab;

pub use error::{Error, Result};
