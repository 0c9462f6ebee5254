//! Ratio block sequences of integer sets, studied at finite truncation.
//!
//! [`set`] describes infinite sets of positive integers symbolically with
//! exact counting; [`generators`] builds the concrete families; [`analysis`]
//! estimates distribution functions, counting ratios, convergence exponents
//! and dispersion; [`ratiogeom`] handles multi-dimensional ratio sets; and
//! [`suite`] replays named checks into a report.

pub mod analysis;
pub mod arith;
pub mod error;
pub mod generators;
pub mod ratiogeom;
pub mod set;
pub mod suite;

pub use arith::{Natural, Rational};
pub use error::{Error, Result};
pub use set::{Prefix, SetDescriptor};
