//! Typical inter-point distances in multitype random intersection graphs.
//!
//! The crate samples bipartite Erdős–Rényi mixture graphs and measures
//! distances in the induced intersection graph, simulates the associated
//! bipartite multitype branching process (with the labelled coupling and its
//! ghost bookkeeping), and evaluates the defective Gumbel-mixture law that
//! approximates the distance distribution.
//!
//! Modules:
//!
//! * [`model`]: parameters, mean matrices, Perron data and derived scalars.
//! * [`graphgen`]: graph sampling and breadth-first distances.
//! * [`bpsim`]: branching-process simulation, martingale limits, survival,
//!   labelled growth and ghost counts.
//! * [`coincidence`]: the coincidence (common label) scheme and its Poisson
//!   approximation bounds.
//! * [`approx`]: the distance approximation and its comparison with
//!   empirical laws.
//! * [`harness`]: configuration, seeding, manifests and the CLI runner.

pub mod approx;
pub mod bpsim;
pub mod coincidence;
mod error;
pub mod graphgen;
pub mod harness;
pub mod model;
pub mod sampling;

pub use error::{Error, Result};
