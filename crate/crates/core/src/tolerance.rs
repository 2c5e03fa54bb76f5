//! Numerical tolerances used across the crate.
//!
//! Inequalities that hold exactly in real arithmetic are evaluated with
//! [`EXACT_RTOL`], which only absorbs floating-point rounding of sums and
//! quotients computed along different paths. Solver outputs are certified
//! against [`SOLVER_SLACK`].

/// Relative allowance for rounding when comparing two sides of an exact inequality.
pub const EXACT_RTOL: f64 = 1e-12;

/// Admissibility slack: a constraint counts as satisfied when its slack is
/// at least `-SOLVER_SLACK * (1 + A)`.
pub const SOLVER_SLACK: f64 = 1e-9;

/// Relative allowance in the triangle inequality check, for metrics
/// computed from coordinates.
pub const TRIANGLE_RTOL: f64 = 1e-12;

/// `lhs <= rhs` up to rounding relative to the magnitudes involved.
pub fn le_rounded(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + EXACT_RTOL * lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE)
}
