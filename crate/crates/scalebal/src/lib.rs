//! Matrix scaling and balancing with finite-precision marginal estimators.
//!
//! The crate implements Sinkhorn scaling and Osborne balancing over a
//! sparse-oracle matrix model. Marginal estimation is pluggable: an exact
//! high-precision reference backend, a deterministic classical estimator, and
//! a statistically exact simulation of the amplitude-estimation subroutine,
//! all with per-call query accounting.

pub mod diagnostics;
pub mod estimators;
pub mod fixedpoint;
pub mod hp;
pub mod instances;
pub mod numerics;
pub mod oracle;
pub mod osborne;
pub mod qsim;
pub mod rng;
pub mod sinkhorn;

pub use fixedpoint::{FixedPoint, FpError, FpFormat, Rational};
// re-exports extended as modules land
