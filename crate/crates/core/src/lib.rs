//! Predictive learning-aided control (PLC) for constrained stochastic
//! network optimization.
//!
//! The crate provides the pieces of the algorithm and the discrete-time
//! simulator used to benchmark it against plain Backpressure:
//!
//! - [`model`]: network states, actions, cost/traffic/service tables, queues.
//! - [`schedule`]: piecewise-stationary state distributions over time.
//! - [`prediction`]: imperfect distribution predictions with a per-slot
//!   total-variation error budget.
//! - [`ade`]: the average-distribution-estimate window pair, blending history
//!   with prediction and detecting distribution change.
//! - [`dual`]: the Lagrangian dual of the deterministic problem, a projected
//!   subgradient solver for the optimal multiplier, and a brute-force grid
//!   oracle to check it.
//! - [`control`]: the controller trait and the registry of implementations
//!   (`bp`, `plc`), plus the max-weight action rule and parameter derivation.
//! - [`sim`]: the slot-by-slot engine with LIFO delay accounting and metrics.

pub mod ade;
pub mod control;
pub mod dual;
pub mod error;
pub mod model;
pub mod prediction;
pub mod schedule;
pub mod sim;

pub use error::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
