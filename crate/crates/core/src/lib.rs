//! Gate-level static timing and clock-domain-crossing analysis.
//!
//! The timing engine ([`sta`], [`skewopt`]) is generic over [`Scalar`], so
//! the same graph can be analysed in `f64`, `f32` or exact rationals. The
//! aliases below fix the common `f64` instantiation.

pub mod cdc;
pub mod constraints;
pub mod diagnostic;
pub mod fmt;
pub mod msim;
pub mod netlist;
pub mod scalar;
pub mod skewopt;
pub mod sta;
pub mod techlib;

pub use diagnostic::{Diagnostic, Severity};
pub use scalar::Scalar;

/// Exact rational time, for analyses that must not round.
pub type Rational = num_rational::Ratio<i64>;

pub type TimingGraph = sta::TimingGraph<f64>;
pub type PathReport = sta::PathReport<f64>;
pub type SkewTable = sta::SkewTable<f64>;
pub type SkewSchedule = skewopt::SkewSchedule<f64>;
pub type SkewConstraintGraph = skewopt::SkewConstraintGraph<f64>;

pub type ExactTimingGraph = sta::TimingGraph<Rational>;
pub type ExactPathReport = sta::PathReport<Rational>;
