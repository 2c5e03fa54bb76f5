//! The maximal operator normalised by `mu(5B)`, its weak (1,1) bound, and
//! the differentiation property on doubling balls.
//!
//! For a fixed member set `{ y : d(c, y) <= rho_k }` the open ball `B(c, r)`
//! has that set exactly when `rho_k < r <= rho_{k+1}`. The integral over the
//! ball is then constant while `mu(B(c, 5r))` decreases as `r` does, down to
//! the closed-ball mass at `5 rho_k`. Hence the supremum over all open balls
//! is the maximum over (centre, breakpoint) pairs of
//! `int_{closed rho_k} |f| / mu(closed B(c, 5 rho_k))`.

use serde::Serialize;

use crate::dominating::{small_beta_threshold, DoublingParams};
use crate::error::{Error, Result};
use crate::space::{Ball, PointId, Space, SpaceFunction};
use crate::tolerance::EXACT_RTOL;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaximalProfile {
    pub values: Vec<f64>,
    /// Only balls of radius at most this are used.
    pub radius_cap: Option<f64>,
}

pub fn maximal_function(space: &Space, f: &SpaceFunction, radius_cap: Option<f64>) -> Result<MaximalProfile> {
    space.check_function(f)?;
    if let Some(cap) = radius_cap {
        if !(cap > 0.0) {
            return Err(Error::InvalidRadius(cap));
        }
    }
    let abs: Vec<f64> = f.values().iter().map(|v| v.abs()).collect();
    let mut values = vec![0.0f64; space.len()];
    for c in 0..space.len() {
        let order = space.radial_order(c);
        let bp = space.breakpoints(c);
        // Balls with r <= cap need rho_k < cap.
        let levels = radius_cap.map_or(bp.len(), |cap| bp.partition_point(|&rho| rho < cap));
        let mut ratios = Vec::with_capacity(levels);
        let mut integral = 0.0;
        let mut counted = 0;
        for (k, &rho) in bp.iter().enumerate().take(levels) {
            let count = space.closed_count_at(c, k);
            for &y in &order[counted..count] {
                integral += space.weight(y) * abs[y];
            }
            counted = count;
            ratios.push(integral / space.closed_mass(c, 5.0 * rho));
        }
        // A point at radial position i lies in every level whose count exceeds i.
        let mut best = 0.0f64;
        for k in (0..levels).rev() {
            best = best.max(ratios[k]);
            let lo = if k == 0 { 0 } else { space.closed_count_at(c, k - 1) };
            for &x in &order[lo..space.closed_count_at(c, k)] {
                values[x] = values[x].max(best);
            }
        }
    }
    Ok(MaximalProfile { values, radius_cap })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakTypeRow {
    pub t: f64,
    /// `mu({ M f > t })`
    pub level_mass: f64,
    /// `||f||_1 / t`
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakTypeReport {
    pub l1_norm: f64,
    pub rows: Vec<WeakTypeRow>,
    pub passed: bool,
    /// Largest `level_mass / bound` over the grid and the `t` where it occurs.
    pub tightest_ratio: f64,
    pub witness_t: Option<f64>,
}

/// Checks `mu({ M f > t }) <= ||f||_1 / t` on every `t` of the grid, with no tolerance.
pub fn weak_type_check(space: &Space, f: &SpaceFunction, t_grid: &[f64]) -> Result<WeakTypeReport> {
    if let Some(&t) = t_grid.iter().find(|&&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::InvalidParameter(format!("t must be positive, got {t}")));
    }
    let profile = maximal_function(space, f, None)?;
    Ok(weak_type_from_profile(space, f, &profile, t_grid))
}

pub fn weak_type_from_profile(
    space: &Space,
    f: &SpaceFunction,
    profile: &MaximalProfile,
    t_grid: &[f64],
) -> WeakTypeReport {
    let l1_norm = f.l1_norm(space);
    let mut rows = Vec::with_capacity(t_grid.len());
    let mut passed = true;
    let mut tightest_ratio = 0.0;
    let mut witness_t = None;
    for &t in t_grid {
        let level_mass: f64 = profile
            .values
            .iter()
            .zip(space.weights())
            .filter(|(m, _)| **m > t)
            .map(|(_, w)| w)
            .sum();
        let bound = l1_norm / t;
        passed &= level_mass <= bound;
        let ratio = if bound > 0.0 { level_mass / bound } else { 0.0 };
        if witness_t.is_none() || ratio > tightest_ratio {
            tightest_ratio = ratio;
            witness_t = Some(t);
        }
        rows.push(WeakTypeRow { t, level_mass, bound });
    }
    WeakTypeReport {
        l1_norm,
        rows,
        passed,
        tightest_ratio,
        witness_t,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DifferentiationRow {
    pub point: PointId,
    /// Largest radius at which `B(x, r)` and `B(x, 5r)` are both `{x}`.
    pub radius: f64,
    pub doubling_ratio: f64,
    pub average: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DifferentiationReport {
    pub rows: Vec<DifferentiationRow>,
    pub passed: bool,
}

/// Averages over shrinking `(5, beta)`-doubling balls around `x` reach `f(x)`
/// once the ball and its 5-dilation are the singleton `{x}`.
pub fn differentiation_check(
    space: &Space,
    f: &SpaceFunction,
    params: &DoublingParams,
    n_exponent: f64,
) -> Result<DifferentiationReport> {
    space.check_function(f)?;
    if params.alpha != 5.0 {
        return Err(Error::InvalidParameter(format!(
            "differentiation uses alpha = 5, got {}",
            params.alpha
        )));
    }
    let threshold = small_beta_threshold(5.0, n_exponent);
    if !(params.beta > threshold) {
        return Err(Error::Hypothesis(format!(
            "beta = {} must exceed 5^n = {threshold}",
            params.beta
        )));
    }
    let mut passed = true;
    let rows = (0..space.len())
        .map(|x| {
            let nearest = space.breakpoints(x).get(1).copied().unwrap_or(1.0);
            let ball = Ball {
                center: x,
                radius: nearest / 5.0,
            };
            let doubling_ratio = crate::dominating::doubling_ratio(space, &ball, 5.0);
            let average = space.average(f, &ball).expect("checked above");
            // `w f(x) / w` can differ from `f(x)` in the last bits.
            passed &= doubling_ratio <= params.beta && (average - f[x]).abs() <= EXACT_RTOL * f[x].abs();
            DifferentiationRow {
                point: x,
                radius: ball.radius,
                doubling_ratio,
                average,
                value: f[x],
            }
        })
        .collect();
    Ok(DifferentiationReport { rows, passed })
}
