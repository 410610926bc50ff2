//! Mixing-aware maximal inequalities for empirical processes.
//!
//! The crate computes the deterministic machinery exactly (sample-size
//! lattice, block-length schedules, dependence-adapted norms, complexity
//! measures, rate factors) and checks the probabilistic statements by
//! seeded Monte Carlo over stationary processes with block-independent
//! replica couplings.
//!
//! Module map:
//!
//! - [`grid`]: admissible sample sizes, divisor sets, block schedules.
//! - [`mixing`]: dependence profiles and their empirical estimators.
//! - [`norms`]: quantile curves, `mu_q`, the `q`-norm, `B_r(q)`, block moments.
//! - [`rates`]: the rate factor, its envelopes and regimes, universal constants.
//! - [`chaining`]: admissible partitions, the complexity functional, covers.
//! - [`processes`]: process generators, test classes, empirical processes.
//! - [`coupling`]: replica paths, coupling gaps, tail and Gaussian experiments.
//! - [`verify`]: end-to-end acceptance checks shared by the CLI and tests.

pub mod chaining;
pub mod coupling;
pub mod error;
pub mod grid;
pub mod mixing;
pub mod norms;
pub mod processes;
pub mod rates;
pub mod report;
pub mod seed;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
