//! Comparison bounds for the constants of an admissible family.
//!
//! With `gamma = C_lambda^log2(alpha)` and `beta > gamma`:
//!
//! * ancestors: for the smallest doubling dilation `B' = alpha^j B`,
//!   `K(B, B') <= 1 + C_lambda (1 + gamma sum_{m<j} (gamma/beta)^m)`;
//! * neighbours: if `d(c1, c2) <= C1 max(r1, r2) <= C2 min(r1, r2)`, both
//!   balls sit in `m B1` with `m = max(1, C2 + C2/C1)`, and `2m B1` sits in
//!   `M B2` with `M = C2 (1 + 2m/C1)`, so
//!   `|f_B1 - f_B2| <= A (2 + C_lambda^(log2(2m) + 1) + C_lambda^(log2 M + 1))`;
//! * doubling balls: `|<f>_B - f_B| <= beta A` when the family was solved
//!   with inflation `alpha`.

use serde::Serialize;

use super::AdmissibleFamily;
use crate::dominating::{ancestor_search, kernel, large_beta_threshold, DominatingFunction, DoublingParams};
use crate::error::{Error, Result};
use crate::space::{Ball, CanonicalBallFamily, Space, SpaceFunction};
use crate::tolerance::le_rounded;

/// Comparability constants for neighbouring balls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NeighbourParams {
    pub c1: f64,
    pub c2: f64,
}

impl Default for NeighbourParams {
    fn default() -> Self {
        Self { c1: 1.0, c2: 2.0 }
    }
}

/// Outcome of one family of inequalities `lhs <= bound`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub checked: usize,
    pub passed: bool,
    /// Largest `lhs / bound`.
    pub worst_ratio: f64,
    /// First failing pair, else the tightest one.
    pub witness: Option<(Ball, Ball)>,
    /// The assembled constant (the largest, where it depends on the pair).
    pub constant: f64,
}

impl BoundCheck {
    fn new() -> Self {
        Self {
            checked: 0,
            passed: true,
            worst_ratio: 0.0,
            witness: None,
            constant: 0.0,
        }
    }

    fn record(&mut self, lhs: f64, bound: f64, witness: (Ball, Ball)) {
        self.checked += 1;
        let ok = le_rounded(lhs, bound);
        let ratio = if lhs == 0.0 { 0.0 } else { lhs / bound };
        if self.passed && (!ok || ratio > self.worst_ratio || self.witness.is_none()) {
            self.witness = Some(witness);
        }
        self.worst_ratio = self.worst_ratio.max(ratio);
        self.passed &= ok;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallBoundsReport {
    pub params: DoublingParams,
    pub neighbours: NeighbourParams,
    pub gamma: f64,
    /// `|f_B - f_B'| <= A K(B, B')` at the canonical ancestor.
    pub ancestor_drift: BoundCheck,
    /// `K(B, B') <= 1 + C_lambda c(beta, gamma)`; `constant` is `C_lambda c` at the largest `j`.
    pub ancestor_kernel: BoundCheck,
    pub neighbour_drift: BoundCheck,
    pub average_vs_constant: BoundCheck,
}

impl BallBoundsReport {
    pub fn passed(&self) -> bool {
        self.ancestor_drift.passed
            && self.ancestor_kernel.passed
            && self.neighbour_drift.passed
            && self.average_vs_constant.passed
    }
}

pub fn check_ball_bounds(
    space: &Space,
    lambda: &DominatingFunction,
    f: &SpaceFunction,
    family: &AdmissibleFamily,
    params: &DoublingParams,
    neighbours: NeighbourParams,
) -> Result<BallBoundsReport> {
    space.check_function(f)?;
    if (family.rho - params.alpha).abs() > 1e-12 * params.alpha {
        return Err(Error::InvalidParameter(format!(
            "family solved with rho = {} but alpha = {}",
            family.rho, params.alpha
        )));
    }
    let c_lambda = lambda.c_lambda();
    let gamma = large_beta_threshold(params.alpha, c_lambda);
    if !(params.beta > gamma) {
        return Err(Error::Hypothesis(format!(
            "beta = {} must exceed C_lambda^log2(alpha) = {gamma}",
            params.beta
        )));
    }
    if !(neighbours.c1 > 0.0 && neighbours.c2 >= neighbours.c1) {
        return Err(Error::InvalidParameter("neighbour constants need 0 < C1 <= C2".into()));
    }
    let canon = CanonicalBallFamily::new(space);
    let a = family.a;
    let values = family.canonical_values();

    let mut ancestor_drift = BoundCheck::new();
    let mut ancestor_kernel = BoundCheck::new();
    for (i, b) in canon.balls().iter().enumerate() {
        let anc = ancestor_search(space, b, params);
        let j = canon.index_of(space, &anc.ball);
        let canonical = canon.balls()[j];
        let k_canonical = kernel(space, lambda, b, &canonical)?;
        ancestor_drift.record((values[i] - values[j]).abs(), a * k_canonical, (*b, canonical));
        let series: f64 = (0..anc.j).map(|m| (gamma / params.beta).powi(m as i32)).sum();
        let c = 1.0 + gamma * series;
        ancestor_kernel.constant = ancestor_kernel.constant.max(c_lambda * c);
        ancestor_kernel.record(kernel(space, lambda, b, &anc.ball)?, 1.0 + c_lambda * c, (*b, anc.ball));
    }

    let NeighbourParams { c1, c2 } = neighbours;
    let m = (c2 + c2 / c1).max(1.0);
    let big_m = c2 * (1.0 + 2.0 * m / c1);
    let neighbour_constant = 2.0 + c_lambda.powf((2.0 * m).log2() + 1.0) + c_lambda.powf(big_m.log2() + 1.0);
    let mut neighbour_drift = BoundCheck::new();
    neighbour_drift.constant = neighbour_constant;
    for (i, b1) in canon.balls().iter().enumerate() {
        for (j, b2) in canon.balls().iter().enumerate().skip(i + 1) {
            let (hi, lo) = (b1.radius.max(b2.radius), b1.radius.min(b2.radius));
            if space.dist(b1.center, b2.center) <= c1 * hi && c1 * hi <= c2 * lo {
                neighbour_drift.record((values[i] - values[j]).abs(), a * neighbour_constant, (*b1, *b2));
            }
        }
    }

    let mut average_vs_constant = BoundCheck::new();
    average_vs_constant.constant = params.beta;
    for (i, b) in canon.balls().iter().enumerate() {
        if params.is_doubling(space, b) {
            let avg = space.set_average(f, &canon.members(space, i));
            average_vs_constant.record((avg - values[i]).abs(), params.beta * a, (*b, *b));
        }
    }

    Ok(BallBoundsReport {
        params: *params,
        neighbours,
        gamma,
        ancestor_drift,
        ancestor_kernel,
        neighbour_drift,
        average_vs_constant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covering::doubling_diagnostics;
    use crate::dominating::fit_power_law;
    use crate::rbmo::tests::s3;
    use crate::rbmo::{build_problem, solve_rbmo};

    fn run(f: SpaceFunction) -> BallBoundsReport {
        let s = s3();
        let lambda = fit_power_law(&s, 1.0).unwrap();
        let diag = doubling_diagnostics(&s);
        let params = DoublingParams::standard(2.0, lambda.c_lambda(), diag.n_exponent).unwrap();
        let fam = solve_rbmo(&build_problem(&s, &lambda, &f, params.alpha).unwrap()).unwrap();
        check_ball_bounds(&s, &lambda, &f, &fam, &params, NeighbourParams::default()).unwrap()
    }

    #[test]
    fn s3_random_function_passes() {
        let r = run(SpaceFunction::new(vec![0.7, -1.2, 2.5]).unwrap());
        assert!(r.passed(), "{r:?}");
        assert!(r.average_vs_constant.checked > 0);
        assert!(r.neighbour_drift.checked > 0);
    }

    #[test]
    fn constant_function_has_zero_left_sides() {
        let r = run(SpaceFunction::constant(3, 1.0));
        assert!(r.passed());
        assert_eq!(r.ancestor_drift.worst_ratio, 0.0);
        assert_eq!(r.neighbour_drift.worst_ratio, 0.0);
        assert_eq!(r.average_vs_constant.worst_ratio, 0.0);
    }

    #[test]
    fn mismatched_rho_is_rejected() {
        let s = s3();
        let lambda = fit_power_law(&s, 1.0).unwrap();
        let f = SpaceFunction::spike(3, 0);
        let fam = solve_rbmo(&build_problem(&s, &lambda, &f, 2.0).unwrap()).unwrap();
        let params = DoublingParams::new(10.0, 1e6).unwrap();
        assert!(check_ball_bounds(&s, &lambda, &f, &fam, &params, NeighbourParams::default()).is_err());
    }
}
