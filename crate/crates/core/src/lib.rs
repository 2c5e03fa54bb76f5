//! Harmonic analysis on finite weighted metric spaces.
//!
//! Balls, dominating functions, covering arguments, the RBMO norm as a linear
//! program, and an executable John-Nirenberg stopping-ball decomposition.

pub mod covering;
pub mod dominating;
pub mod error;
pub mod john_nirenberg;
pub mod operators;
pub mod rbmo;
pub mod space;
pub mod tolerance;

pub use error::{Error, Result};
pub use rbmo::{AdmissibleFamily, RbmoProblem};
pub use space::{
    Ball, CanonicalBallFamily, Generator, MetricKind, PointId, PointSet, Space, SpaceDocument, SpaceFunction,
};
