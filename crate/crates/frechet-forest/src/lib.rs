//! Random forests for metric-space-valued responses, with out-of-bag
//! prediction balls for uncertainty quantification.
//!
//! The crate provides:
//! - distances and geometry helpers for Euclidean spaces, the sphere, the
//!   hyperboloid, SPD matrices (affine-invariant, log-Cholesky, and
//!   log-Euclidean), quantile-grid distributions, and spheroids ([`metric`]);
//! - Fréchet means, variances, and medoids ([`frechet`]);
//! - samplers for von Mises-Fisher, hyperboloid von Mises-Fisher, and
//!   Wishart distributions plus synthetic regression scenarios ([`sampling`]);
//! - Fréchet decision trees and three forest flavors with out-of-bag
//!   bookkeeping ([`forest`]);
//! - out-of-bag, split-conformal, and population prediction balls ([`balls`]);
//! - a Monte Carlo experiment engine for coverage, radius, and MSE studies
//!   ([`harness`]);
//! - a command-line surface over all of the above ([`cli`]).
//!
//! See the `examples/` directory for a runnable tour of each capability.

pub mod balls;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod forest;
pub mod frechet;
pub mod harness;
pub mod metric;
pub mod sampling;

pub use error::{Error, Result};
