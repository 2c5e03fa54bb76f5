//! Dominating functions `lambda(x, r)`, their verification, the regularity
//! kernel `K(B, B1)`, and searches for `(alpha, beta)`-doubling balls.

use serde::{Deserialize, Serialize};

use crate::covering::{measure_doubling_constant, DoublingDiagnostics};
use crate::error::{Error, Result};
use crate::space::canonical::outer_bound;
use crate::space::{Ball, PointId, PointSet, Space};
use crate::tolerance::le_rounded;

/// A majorant of ball measures with `lambda(x, 2r) <= C_lambda * lambda(x, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant")]
pub enum DominatingFunction {
    /// `c * r^d`; doubling constant `2^d`.
    #[serde(rename = "power")]
    PowerLaw { c: f64, d: f64 },
    /// `mu(B(x, r))` itself; `c_lambda` is the measure doubling constant.
    #[serde(rename = "ballmeasure")]
    BallMeasure { c_lambda: f64 },
    /// The least function satisfying the axioms with the given doubling constant.
    #[serde(rename = "envelope")]
    Envelope { c_lambda: f64 },
}

impl DominatingFunction {
    pub fn power_law(c: f64, d: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0 && d.is_finite() && d > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "power law needs C > 0 and d > 0, got C = {c}, d = {d}"
            )));
        }
        Ok(Self::PowerLaw { c, d })
    }

    pub fn ball_measure(space: &Space) -> Self {
        Self::BallMeasure {
            c_lambda: measure_doubling_constant(space).0,
        }
    }

    pub fn c_lambda(&self) -> f64 {
        match *self {
            Self::PowerLaw { d, .. } => 2f64.powf(d),
            Self::BallMeasure { c_lambda } | Self::Envelope { c_lambda } => c_lambda,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::PowerLaw { .. } => "power",
            Self::BallMeasure { .. } => "ballmeasure",
            Self::Envelope { .. } => "envelope",
        }
    }

    pub fn evaluate(&self, space: &Space, x: PointId, r: f64) -> Result<f64> {
        space.check_point(x)?;
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidRadius(r));
        }
        Ok(self.value(space, x, r))
    }

    pub(crate) fn value(&self, space: &Space, x: PointId, r: f64) -> f64 {
        match *self {
            Self::PowerLaw { c, d } => c * r.powf(d),
            Self::BallMeasure { .. } => space.open_mass(x, r),
            Self::Envelope { c_lambda } => envelope(space, x, r, c_lambda, Space::open_mass),
        }
    }

    /// Limit of `lambda(x, s)` as `s` decreases to `r`.
    pub fn right_limit(&self, space: &Space, x: PointId, r: f64) -> f64 {
        match *self {
            Self::PowerLaw { c, d } => c * r.powf(d),
            Self::BallMeasure { .. } => space.closed_mass(x, r),
            Self::Envelope { c_lambda } => envelope(space, x, r, c_lambda, Space::closed_mass),
        }
    }

    /// Radius below which domination is not claimed. Atoms rule out any
    /// power law near zero; the other variants dominate at every scale.
    pub fn scale_floor(&self, space: &Space) -> Option<f64> {
        match self {
            Self::PowerLaw { .. } => Some(atomic_scale(space)),
            _ => None,
        }
    }
}

/// `max_j C^-j mu(B(x, 2^j r))`, stopping once the ball is the whole space.
fn envelope(space: &Space, x: PointId, r: f64, c_lambda: f64, mass: fn(&Space, PointId, f64) -> f64) -> f64 {
    let rho_max = *space.breakpoints(x).last().unwrap();
    let mut best = 0.0f64;
    let mut scale = 1.0;
    let mut s = r;
    loop {
        best = best.max(mass(space, x, s) * scale);
        if s > rho_max {
            return best;
        }
        s *= 2.0;
        scale /= c_lambda;
    }
}

/// Smallest positive distance, or 1 for a single point.
pub fn atomic_scale(space: &Space) -> f64 {
    space.min_separation().unwrap_or(1.0)
}

/// Least `C` such that `mu(B(x, r)) <= C r^d` for all `x` and all `r` at or
/// above the atomic scale.
///
/// On `(rho_k, rho_{k+1}]` the ball mass is the closed `rho_k` mass, so the
/// supremum of the ratio is attained as `r` decreases to `rho_k`; the
/// singleton balls contribute `w_x / s^d` at the scale floor `s`.
pub fn fit_power_law(space: &Space, d: f64) -> Result<DominatingFunction> {
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::InvalidParameter(format!("exponent must be positive, got {d}")));
    }
    let floor = atomic_scale(space);
    let mut c = 0.0f64;
    for x in 0..space.len() {
        c = c.max(space.weight(x) / floor.powf(d));
        for (k, &rho) in space.breakpoints(x).iter().enumerate().skip(1) {
            c = c.max(space.prefix_mass(x, space.closed_count_at(x, k)) / rho.powf(d));
        }
    }
    DominatingFunction::power_law(c, d)
}

pub fn minimal_envelope(c_lambda: f64) -> Result<DominatingFunction> {
    if !(c_lambda.is_finite() && c_lambda > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "envelope needs C_lambda > 1, got {c_lambda}"
        )));
    }
    Ok(DominatingFunction::Envelope { c_lambda })
}

/// Radii at which a dominating function is checked around `x`: positive
/// breakpoints, canonical midpoints, and the whole-space radius.
pub fn radius_grid(space: &Space, x: PointId) -> Vec<f64> {
    let bp = space.breakpoints(x);
    let mut grid: Vec<f64> = Vec::with_capacity(2 * bp.len());
    for k in 0..bp.len() {
        if k > 0 {
            grid.push(bp[k]);
        }
        let hi = bp.get(k + 1).copied().unwrap_or_else(|| outer_bound(bp[k]));
        grid.push(0.5 * (bp[k] + hi));
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// One axiom checked over the grid, with the worst offender.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomCheck {
    pub passed: bool,
    pub checked: usize,
    /// Largest `lhs / rhs` seen.
    pub worst_ratio: f64,
    pub witness: Option<Ball>,
}

impl AxiomCheck {
    fn new() -> Self {
        Self {
            passed: true,
            checked: 0,
            worst_ratio: 0.0,
            witness: None,
        }
    }

    fn record(&mut self, lhs: f64, rhs: f64, at: PointId, r: f64) {
        self.checked += 1;
        let ratio = if rhs > 0.0 { lhs / rhs } else { f64::INFINITY };
        let ok = le_rounded(lhs, rhs);
        let first_failure = !ok && self.passed;
        if first_failure || (ok && self.passed && ratio > self.worst_ratio) {
            self.witness = Some(Ball { center: at, radius: r });
        }
        self.worst_ratio = self.worst_ratio.max(ratio);
        self.passed &= ok;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpperDoublingReport {
    pub variant: &'static str,
    #[serde(rename = "C_lambda")]
    pub c_lambda: f64,
    /// Domination is only checked at radii at or above this scale.
    pub scale_floor: Option<f64>,
    pub monotone: AxiomCheck,
    pub doubling: AxiomCheck,
    pub domination: AxiomCheck,
    /// `mu(B(y, r)) <= C_lambda lambda(x, r)` whenever `d(x, y) <= r`.
    pub off_center: AxiomCheck,
}

impl UpperDoublingReport {
    pub fn passed(&self) -> bool {
        self.monotone.passed && self.doubling.passed && self.domination.passed && self.off_center.passed
    }
}

pub fn verify_upper_doubling(space: &Space, lambda: &DominatingFunction) -> UpperDoublingReport {
    let c = lambda.c_lambda();
    let floor = lambda.scale_floor(space);
    let above_floor = |r: f64| floor.is_none_or(|f| r >= f);
    let mut monotone = AxiomCheck::new();
    let mut doubling = AxiomCheck::new();
    let mut domination = AxiomCheck::new();
    let mut off_center = AxiomCheck::new();
    for x in 0..space.len() {
        let grid = radius_grid(space, x);
        let values: Vec<f64> = grid.iter().map(|&r| lambda.value(space, x, r)).collect();
        for i in 1..grid.len() {
            monotone.record(values[i - 1], values[i], x, grid[i]);
        }
        for (&r, &v) in grid.iter().zip(&values) {
            doubling.record(lambda.value(space, x, 2.0 * r), c * v, x, r);
            if !above_floor(r) {
                continue;
            }
            domination.record(space.open_mass(x, r), v, x, r);
            for y in 0..space.len() {
                if space.dist(x, y) <= r {
                    off_center.record(space.open_mass(y, r), c * v, y, r);
                }
            }
        }
        // Right limits at the breakpoints, where open-ball masses jump.
        for &rho in &space.breakpoints(x)[1..] {
            if above_floor(rho) {
                domination.record(space.closed_mass(x, rho), lambda.right_limit(space, x, rho), x, rho);
            }
        }
    }
    UpperDoublingReport {
        variant: lambda.kind(),
        c_lambda: c,
        scale_floor: floor,
        monotone,
        doubling,
        domination,
        off_center,
    }
}

/// `K(B, B1) = 1 + sum over y in 2B1 \ B of w_y / lambda(c_B, d(y, c_B))`.
pub fn kernel(space: &Space, lambda: &DominatingFunction, b: &Ball, b1: &Ball) -> Result<f64> {
    let inner = space.ball_members(b)?;
    let outer = space.ball_members(b1)?;
    if b.radius > b1.radius || !inner.is_subset(&outer) {
        return Err(Error::KernelPrecondition(format!(
            "B({}, {}) is not inside B({}, {})",
            space.name(b.center),
            b.radius,
            space.name(b1.center),
            b1.radius
        )));
    }
    Ok(kernel_unchecked(space, lambda, b, b1, &inner))
}

/// [`kernel`] without the inclusion check; `inner` must be the members of `b`.
pub(crate) fn kernel_unchecked(
    space: &Space,
    lambda: &DominatingFunction,
    b: &Ball,
    b1: &Ball,
    inner: &PointSet,
) -> f64 {
    let reach = 2.0 * b1.radius;
    let mut k = 1.0;
    for y in 0..space.len() {
        if space.dist(b1.center, y) < reach && !inner.contains(y) {
            k += space.weight(y) / lambda.value(space, b.center, space.dist(y, b.center));
        }
    }
    k
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelLogCheck {
    pub kernel: f64,
    /// `C_lambda * log2(4 r_B1 / r_B)`
    pub bound: f64,
    pub passed: bool,
}

pub fn kernel_log_bound_check(
    space: &Space,
    lambda: &DominatingFunction,
    b: &Ball,
    b1: &Ball,
) -> Result<KernelLogCheck> {
    let k = kernel(space, lambda, b, b1)?;
    let bound = lambda.c_lambda() * (4.0 * b1.radius / b.radius).log2();
    Ok(KernelLogCheck {
        kernel: k,
        bound,
        passed: le_rounded(k - 1.0, bound),
    })
}

/// `alpha` and `beta` for `(alpha, beta)`-doubling balls: `mu(alpha B) <= beta mu(B)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoublingParams {
    pub alpha: f64,
    pub beta: f64,
}

impl DoublingParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 1.0 && beta.is_finite() && beta > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "doubling parameters need alpha > 1 and beta > 1, got alpha = {alpha}, beta = {beta}"
            )));
        }
        Ok(Self { alpha, beta })
    }

    /// `alpha = 5 rho`, `beta = 2 max(C_lambda^log2(alpha), alpha^n)`.
    pub fn standard(rho: f64, c_lambda: f64, n_exponent: f64) -> Result<Self> {
        let alpha = 5.0 * rho;
        Self::new(
            alpha,
            2.0 * large_beta_threshold(alpha, c_lambda).max(small_beta_threshold(alpha, n_exponent)),
        )
    }

    pub fn is_doubling(&self, space: &Space, ball: &Ball) -> bool {
        doubling_ratio(space, ball, self.alpha) <= self.beta
    }
}

/// `C_lambda^log2(alpha)`: `beta` must exceed this for large doubling balls to exist.
pub fn large_beta_threshold(alpha: f64, c_lambda: f64) -> f64 {
    c_lambda.powf(alpha.log2())
}

/// `alpha^n`: `beta` must exceed this for small doubling balls to exist.
pub fn small_beta_threshold(alpha: f64, n_exponent: f64) -> f64 {
    alpha.powf(n_exponent)
}

pub fn doubling_ratio(space: &Space, ball: &Ball, alpha: f64) -> f64 {
    space.open_mass(ball.center, alpha * ball.radius) / space.open_mass(ball.center, ball.radius)
}

/// The smallest `alpha^j B` that is `(alpha, beta)`-doubling.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ancestor {
    pub ball: Ball,
    pub j: usize,
    /// `mu(alpha^{i+1} B) / mu(alpha^i B)` for `i = 0..=j`; all but the last exceed `beta`.
    pub ratios: Vec<f64>,
}

pub fn doubling_ancestor(
    space: &Space,
    lambda: &DominatingFunction,
    b: &Ball,
    params: &DoublingParams,
) -> Result<Ancestor> {
    space.check_point(b.center)?;
    let threshold = large_beta_threshold(params.alpha, lambda.c_lambda());
    if !(params.beta > threshold) {
        return Err(Error::Hypothesis(format!(
            "beta = {} must exceed C_lambda^log2(alpha) = {threshold}",
            params.beta
        )));
    }
    Ok(ancestor_search(space, b, params))
}

/// Terminates because once `alpha^j B` is the whole space the ratio is 1 < beta.
pub(crate) fn ancestor_search(space: &Space, b: &Ball, params: &DoublingParams) -> Ancestor {
    let mut ball = *b;
    let mut ratios = Vec::new();
    for j in 0.. {
        let ratio = doubling_ratio(space, &ball, params.alpha);
        ratios.push(ratio);
        if ratio <= params.beta {
            return Ancestor { ball, j, ratios };
        }
        ball = ball.dilate(params.alpha);
    }
    unreachable!()
}

/// The largest doubling ball `B(x, alpha^-j r)`, `j <= j_max`, accepted by `accept`.
pub fn small_doubling_ball(
    space: &Space,
    x: PointId,
    r: f64,
    params: &DoublingParams,
    j_max: usize,
    mut accept: impl FnMut(&Ball) -> bool,
) -> Result<Option<(Ball, usize)>> {
    space.check_point(x)?;
    let mut ball = Ball::new(x, r)?;
    for j in 0..=j_max {
        if params.is_doubling(space, &ball) && accept(&ball) {
            return Ok(Some((ball, j)));
        }
        ball = ball.dilate(1.0 / params.alpha);
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BadPoints {
    pub k: usize,
    pub points: Vec<PointId>,
    pub mass: f64,
    /// `N 2^n mu(3 B0) (alpha^n / beta)^k`
    pub bound: f64,
    pub passed: bool,
}

/// Points `x` of `b0` for which no `alpha^j B(x, alpha^-k r)`, `j = 0..=k`, is doubling.
pub fn bad_points(
    space: &Space,
    diagnostics: &DoublingDiagnostics,
    b0: &Ball,
    params: &DoublingParams,
    k: usize,
) -> Result<BadPoints> {
    let members = space.ball_members(b0)?;
    let n = diagnostics.n_exponent;
    let threshold = small_beta_threshold(params.alpha, n);
    if !(params.beta > threshold) {
        return Err(Error::Hypothesis(format!(
            "beta = {} must exceed alpha^n = {threshold}",
            params.beta
        )));
    }
    let base = b0.radius * params.alpha.powi(-(k as i32));
    let points: Vec<PointId> = members
        .ones()
        .filter(|&x| {
            let mut ball = Ball {
                center: x,
                radius: base,
            };
            for _ in 0..=k {
                if params.is_doubling(space, &ball) {
                    return false;
                }
                ball = ball.dilate(params.alpha);
            }
            true
        })
        .collect();
    let mass = points.iter().map(|&p| space.weight(p)).sum();
    let bound = diagnostics.n_bound as f64
        * 2f64.powf(n)
        * space.open_mass(b0.center, 3.0 * b0.radius)
        * (threshold / params.beta).powi(k as i32);
    Ok(BadPoints {
        k,
        points,
        mass,
        bound,
        passed: le_rounded(mass, bound),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covering::doubling_diagnostics;
    use crate::space::{CanonicalBallFamily, Generator};
    use proptest::prelude::*;

    fn s3() -> Space {
        Space::from_coords(
            Space::default_names(3),
            &[vec![0.0], vec![1.0], vec![3.0]],
            vec![1.0; 3],
        )
        .unwrap()
    }

    fn ball(c: usize, r: f64) -> Ball {
        Ball::new(c, r).unwrap()
    }

    #[test]
    fn evaluation() {
        let s = s3();
        let p = DominatingFunction::power_law(1.0, 1.0).unwrap();
        assert_eq!(p.evaluate(&s, 0, 3.0).unwrap(), 3.0);
        let m = DominatingFunction::ball_measure(&s);
        assert_eq!(m.evaluate(&s, 0, 1.5).unwrap(), 2.0);
        let e = minimal_envelope(2.0).unwrap();
        assert_eq!(e.evaluate(&s, 0, 0.5).unwrap(), 1.0);
        assert!(p.evaluate(&s, 0, 0.0).is_err());
        assert!(minimal_envelope(1.0).is_err());
    }

    #[test]
    fn serialised_forms() {
        let p = DominatingFunction::power_law(2.0, 1.0).unwrap();
        assert_eq!(
            serde_json::to_string(&p).unwrap(),
            r#"{"variant":"power","c":2.0,"d":1.0}"#
        );
        let back: DominatingFunction = serde_json::from_str(r#"{"variant":"envelope","c_lambda":3.0}"#).unwrap();
        assert_eq!(back, DominatingFunction::Envelope { c_lambda: 3.0 });
    }

    #[test]
    fn large_constant_envelope_is_closed_mass() {
        let s = s3();
        let e = minimal_envelope(s.total_mass() / s.min_weight() + 1.0).unwrap();
        for x in 0..3 {
            for r in radius_grid(&s, x) {
                assert_eq!(e.evaluate(&s, x, r).unwrap(), s.open_mass(x, r));
            }
        }
    }

    #[test]
    fn ball_measure_passes_on_grid() {
        let s = Generator::UniformGrid { n: 16, dim: 1 }.build().unwrap();
        let m = DominatingFunction::ball_measure(&s);
        assert_eq!(m.c_lambda(), 3.0);
        assert!(verify_upper_doubling(&s, &m).passed());
    }

    #[test]
    fn undersized_power_law_fails_with_witness() {
        let s = s3();
        let p = DominatingFunction::power_law(0.1, 1.0).unwrap();
        let report = verify_upper_doubling(&s, &p);
        assert!(!report.domination.passed);
        let w = report.domination.witness.unwrap();
        assert!(s.open_mass(w.center, w.radius) > 0.1 * w.radius);
    }

    #[test]
    fn fitted_power_laws() {
        let s = s3();
        let fit = fit_power_law(&s, 1.0).unwrap();
        assert_eq!(fit, DominatingFunction::PowerLaw { c: 2.0, d: 1.0 });
        assert!(verify_upper_doubling(&s, &fit).passed());
        let one = Space::from_matrix(vec!["x".into()], vec![vec![0.0]], vec![4.0]).unwrap();
        assert_eq!(
            fit_power_law(&one, 2.0).unwrap(),
            DominatingFunction::PowerLaw { c: 4.0, d: 2.0 }
        );
        let grid = Generator::UniformGrid { n: 10, dim: 1 }.build().unwrap();
        let unit = DominatingFunction::power_law(1.0, 1.0).unwrap();
        assert!(!verify_upper_doubling(&grid, &unit).passed());
        let fit = fit_power_law(&grid, 1.0).unwrap();
        assert!(verify_upper_doubling(&grid, &fit).passed());
        // Shrinking the fitted constant breaks domination.
        if let DominatingFunction::PowerLaw { c, d } = fit {
            let smaller = DominatingFunction::power_law(c * 0.99, d).unwrap();
            assert!(!verify_upper_doubling(&grid, &smaller).domination.passed);
        }
    }

    #[test]
    fn cantor_fit_is_reported() {
        let d = 2f64.ln() / 3f64.ln();
        for level in 1..=5 {
            let s = Generator::CantorDust { level }.build().unwrap();
            let fit = fit_power_law(&s, d).unwrap();
            assert!(verify_upper_doubling(&s, &fit).passed());
        }
    }

    #[test]
    fn kernel_examples() {
        let s = s3();
        let p = DominatingFunction::power_law(1.0, 1.0).unwrap();
        let k = kernel(&s, &p, &ball(0, 0.5), &ball(0, 2.0)).unwrap();
        assert!((k - 7.0 / 3.0).abs() < 1e-15);
        let check = kernel_log_bound_check(&s, &p, &ball(0, 0.5), &ball(0, 2.0)).unwrap();
        assert_eq!(check.bound, 8.0);
        assert!(check.passed);
        assert_eq!(kernel(&s, &p, &ball(0, 6.0), &ball(0, 6.0)).unwrap(), 1.0);
        let same = kernel(&s, &p, &ball(0, 2.0), &ball(0, 2.0)).unwrap();
        assert!((same - (1.0 + 1.0 / 3.0)).abs() < 1e-15);
        assert!(matches!(
            kernel(&s, &p, &ball(0, 2.0), &ball(2, 0.5)),
            Err(Error::KernelPrecondition(_))
        ));
    }

    #[test]
    fn ancestors() {
        let s = s3();
        let m = DominatingFunction::ball_measure(&s);
        let params = DoublingParams::new(2.0, 10.0).unwrap();
        let a = doubling_ancestor(&s, &m, &ball(0, 0.5), &params).unwrap();
        assert_eq!((a.j, a.ball), (0, ball(0, 0.5)));
        let tight = DoublingParams::new(2.0, 1.0 + 1e-9).unwrap();
        assert!(matches!(
            doubling_ancestor(&s, &m, &ball(0, 0.5), &tight),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn segment_ancestor_certificate() {
        let s = Generator::SegmentPlusCluster { n: 8, gap: 100.0 }.build().unwrap();
        let fit = fit_power_law(&s, 1.0).unwrap();
        let params = DoublingParams::new(2.0, 4.0 * fit.c_lambda()).unwrap();
        // Ball around the last segment point reaching up to, but not across, the gap.
        let a = doubling_ancestor(&s, &fit, &ball(7, 64.0), &params).unwrap();
        assert!(a.j >= 1);
        assert!(a.ratios[..a.j].iter().all(|&q| q > params.beta));
        assert!(a.ratios[a.j] <= params.beta);
    }

    #[test]
    fn small_doubling_examples() {
        let s = s3();
        let params = DoublingParams::new(2.0, 2.5).unwrap();
        let found = small_doubling_ball(&s, 0, 4.0, &params, 10, |_| true).unwrap();
        assert_eq!(found, Some((ball(0, 4.0), 0)));
        let found = small_doubling_ball(&s, 1, 4.0, &params, 10, |b| b.radius < 1.0).unwrap();
        let (b, j) = found.unwrap();
        assert_eq!(s.ball_members(&b).unwrap().count_ones(..), 1);
        assert_eq!(b.radius, 4.0 * 0.5f64.powi(j as i32));
        assert_eq!(small_doubling_ball(&s, 1, 4.0, &params, 10, |_| false).unwrap(), None);
    }

    #[test]
    fn bad_point_bounds() {
        for s in [
            Generator::UniformGrid { n: 12, dim: 1 }.build().unwrap(),
            Generator::SegmentPlusCluster { n: 8, gap: 100.0 }.build().unwrap(),
            Generator::CantorDust { level: 3 }.build().unwrap(),
        ] {
            let diag = doubling_diagnostics(&s);
            let params = DoublingParams::new(2.0, 1.5 * small_beta_threshold(2.0, diag.n_exponent)).unwrap();
            let b0 = CanonicalBallFamily::new(&s).around(0).last().copied().unwrap();
            for k in 0..=10 {
                let bad = bad_points(&s, &diag, &b0, &params, k).unwrap();
                assert!(bad.passed, "{bad:?}");
            }
        }
    }

    #[test]
    fn generous_beta_has_no_bad_points() {
        let s = Generator::SegmentPlusCluster { n: 8, gap: 100.0 }.build().unwrap();
        let diag = doubling_diagnostics(&s);
        let beta = (s.total_mass() / s.min_weight()).max(small_beta_threshold(2.0, diag.n_exponent)) + 1.0;
        let params = DoublingParams::new(2.0, beta).unwrap();
        let b0 = ball(0, 400.0);
        for k in 0..=5 {
            assert!(bad_points(&s, &diag, &b0, &params, k).unwrap().points.is_empty());
        }
    }

    fn small_space() -> impl Strategy<Value = Space> {
        (1usize..=7, any::<u64>()).prop_map(|(n, seed)| Generator::RandomEuclidean { n, seed }.build().unwrap())
    }

    proptest! {
        #[test]
        fn envelope_is_minimal(s in small_space(), d in 0.5f64..3.0) {
            let fit = fit_power_law(&s, d).unwrap();
            let env = minimal_envelope(fit.c_lambda()).unwrap();
            prop_assert!(verify_upper_doubling(&s, &env).passed());
            let floor = atomic_scale(&s);
            for x in 0..s.len() {
                for r in radius_grid(&s, x).into_iter().filter(|&r| r >= floor) {
                    prop_assert!(le_rounded(env.value(&s, x, r), fit.value(&s, x, r)));
                }
            }
            let m = DominatingFunction::ball_measure(&s);
            if m.c_lambda() > 1.0 {
                let env = minimal_envelope(m.c_lambda()).unwrap();
                for x in 0..s.len() {
                    for r in radius_grid(&s, x) {
                        prop_assert!(le_rounded(env.value(&s, x, r), m.value(&s, x, r)));
                    }
                }
            }
        }

        #[test]
        fn verified_functions_dominate_canonical_balls(s in small_space(), d in 0.5f64..3.0) {
            for lambda in [fit_power_law(&s, d).unwrap(), DominatingFunction::ball_measure(&s)] {
                prop_assert!(verify_upper_doubling(&s, &lambda).passed());
                let floor = lambda.scale_floor(&s).unwrap_or(0.0);
                for b in CanonicalBallFamily::new(&s).balls().iter().filter(|b| b.radius >= floor) {
                    prop_assert!(s.ball_measure(b).unwrap() <= lambda.value(&s, b.center, b.radius));
                }
            }
        }

        #[test]
        fn kernel_is_monotone_in_outer_ball(s in small_space(), c in 0usize..7) {
            let c = c % s.len();
            let lambda = DominatingFunction::ball_measure(&s);
            let fam = CanonicalBallFamily::new(&s);
            let around = fam.around(c);
            for i in 0..around.len() {
                let mut prev = 1.0;
                for outer in &around[i..] {
                    let k = kernel(&s, &lambda, &around[i], outer).unwrap();
                    prop_assert!(k >= prev);
                    prev = k;
                }
            }
        }

        #[test]
        fn restriction_keeps_upper_doubling(s in small_space(), mask in 1u32..128, d in 0.5f64..2.0) {
            let subset = s.point_set((0..s.len()).filter(|i| mask & (1 << i) != 0));
            prop_assume!(!subset.is_clear());
            let sub = s.restrict(&subset).unwrap();
            let fit = fit_power_law(&s, d).unwrap();
            let report = verify_upper_doubling(&sub, &fit);
            prop_assert!(report.doubling.passed && report.monotone.passed);
            // Parent domination carries over above the parent's atomic scale.
            let floor = atomic_scale(&s);
            for x in 0..sub.len() {
                for r in radius_grid(&sub, x).into_iter().filter(|&r| r >= floor) {
                    prop_assert!(sub.open_mass(x, r) <= fit.value(&sub, x, r));
                }
            }
        }

        #[test]
        fn ancestor_is_first_doubling_dilation(s in small_space(), c in 0usize..7, r in 0.01f64..2.0) {
            let lambda = DominatingFunction::ball_measure(&s);
            let alpha = 3.0;
            let beta = large_beta_threshold(alpha, lambda.c_lambda()) * 1.01 + 1.0;
            let params = DoublingParams::new(alpha, beta).unwrap();
            let a = doubling_ancestor(&s, &lambda, &Ball::new(c % s.len(), r).unwrap(), &params).unwrap();
            prop_assert!(params.is_doubling(&s, &a.ball));
            prop_assert_eq!(a.ratios.len(), a.j + 1);
            prop_assert!(a.ratios[..a.j].iter().all(|&q| q > beta));
        }
    }
}
