//! The RBMO norm of a function as a linear program.
//!
//! Unknowns are a bound `A` and one constant `f_B` per ball. Every ball
//! contributes the oscillation constraint
//! `sum_{y in B} w_y |f(y) - f_B| <= A mu(rho B)`, and every inclusion pair
//! `(B, B1)` the regularity constraint `|f_B - f_B1| <= A K(B, B1)`.
//! Balls are the canonical family, optionally refined with extra radii.

mod ball_bounds;
mod compare;
mod solve;

use std::io::Write;

use serde::Serialize;

use crate::dominating::{kernel_unchecked, DominatingFunction};
use crate::error::{Error, Result};
use crate::space::{refinement_radii, Ball, CanonicalBallFamily, PointSet, Space, SpaceFunction};
use crate::tolerance::SOLVER_SLACK;

pub use ball_bounds::{check_ball_bounds, BallBoundsReport, BoundCheck, NeighbourParams};
pub use compare::{
    bmo_norm, compare_bmo, compare_rho, BmoComparison, PairLogCheck, RhoComparison, DEFAULT_DOUBLING_LIMIT,
};
pub use solve::solve_rbmo;

/// A nested pair `members(inner) ⊆ members(outer)`, `r_inner <= r_outer`, with its kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InclusionPair {
    pub inner: usize,
    pub outer: usize,
    pub kernel: f64,
}

/// `phi(x) = sum w_i |v_i - x|` over a ball's members, stored as sorted
/// distinct values with prefix sums so that each linear piece is O(1).
#[derive(Debug, Clone)]
pub(crate) struct Oscillation {
    values: Vec<f64>,
    /// `below_w[j]`, `below_wv[j]`: weight and weighted sum of `values[..j]`.
    below_w: Vec<f64>,
    below_wv: Vec<f64>,
    members: Vec<(f64, f64)>,
}

impl Oscillation {
    fn new(space: &Space, f: &SpaceFunction, members: &PointSet) -> Self {
        let mut pts: Vec<(f64, f64)> = members.ones().map(|y| (f[y], space.weight(y))).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut values = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for &(v, w) in &pts {
            if values.last() == Some(&v) {
                *weights.last_mut().unwrap() += w;
            } else {
                values.push(v);
                weights.push(w);
            }
        }
        let mut below_w = vec![0.0];
        let mut below_wv = vec![0.0];
        for (v, w) in values.iter().zip(&weights) {
            below_w.push(below_w.last().unwrap() + w);
            below_wv.push(below_wv.last().unwrap() + w * v);
        }
        Self {
            values,
            below_w,
            below_wv,
            members: pts,
        }
    }

    /// Exact `sum w |v - x|`, summed directly.
    pub(crate) fn eval(&self, x: f64) -> f64 {
        self.members.iter().map(|&(v, w)| w * (v - x).abs()).sum()
    }

    pub(crate) fn piece_count(&self) -> usize {
        self.values.len() + 1
    }

    /// Piece `j` (values `< x` are exactly `values[..j]`) as `(slope, intercept)`.
    pub(crate) fn piece(&self, j: usize) -> (f64, f64) {
        let wl = self.below_w[j];
        let wvl = self.below_wv[j];
        let w = *self.below_w.last().unwrap();
        let wv = *self.below_wv.last().unwrap();
        (wl - (w - wl), (wv - wvl) - wvl)
    }

    pub(crate) fn active_piece(&self, x: f64) -> usize {
        self.values.partition_point(|&v| v <= x)
    }

    /// `{x : phi(x) <= c}` as an interval, computed piece by piece.
    pub(crate) fn sublevel(&self, c: f64) -> (f64, f64) {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for j in 0..self.piece_count() {
            let (s, t) = self.piece(j);
            if s > 0.0 {
                hi = hi.min((c - t) / s);
            } else if s < 0.0 {
                lo = lo.max((c - t) / s);
            }
        }
        (lo, hi)
    }

    /// Smallest value of `phi`, attained at a weighted median.
    pub(crate) fn minimum(&self) -> f64 {
        self.values.iter().map(|&v| self.eval(v)).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone)]
pub struct RbmoProblem {
    pub(crate) space: Space,
    pub(crate) lambda: DominatingFunction,
    pub(crate) f: SpaceFunction,
    pub(crate) rho: f64,
    pub(crate) family: CanonicalBallFamily,
    /// Canonical balls first, then refinement balls.
    pub(crate) balls: Vec<Ball>,
    pub(crate) members: Vec<PointSet>,
    /// `mu(rho B)` per ball.
    pub(crate) inflated: Vec<f64>,
    pub(crate) oscillation: Vec<Oscillation>,
    pub(crate) pairs: Vec<InclusionPair>,
    pub(crate) self_pairs: usize,
}

/// Counts describing a problem, for reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemSummary {
    pub points: usize,
    pub balls: usize,
    pub canonical_balls: usize,
    pub inclusion_pairs: usize,
    pub self_pairs: usize,
    pub rho: f64,
    pub lambda: DominatingFunction,
}

pub fn build_problem(space: &Space, lambda: &DominatingFunction, f: &SpaceFunction, rho: f64) -> Result<RbmoProblem> {
    build_refined_problem(space, lambda, f, rho, 0)
}

/// [`build_problem`] with `extra` additional radii inside every gap between breakpoints.
pub fn build_refined_problem(
    space: &Space,
    lambda: &DominatingFunction,
    f: &SpaceFunction,
    rho: f64,
    extra: usize,
) -> Result<RbmoProblem> {
    if !(rho.is_finite() && rho > 1.0) {
        return Err(Error::InvalidParameter(format!("rho must exceed 1, got {rho}")));
    }
    space.check_function(f)?;
    let family = CanonicalBallFamily::new(space);
    let mut balls = family.balls().to_vec();
    for c in 0..space.len() {
        balls.extend(
            refinement_radii(space, c, extra)
                .into_iter()
                .map(|radius| Ball { center: c, radius }),
        );
    }
    let members: Vec<PointSet> = balls.iter().map(|b| space.open_members(b.center, b.radius)).collect();
    let inflated = balls
        .iter()
        .map(|b| space.open_mass(b.center, rho * b.radius))
        .collect();
    let oscillation = members.iter().map(|m| Oscillation::new(space, f, m)).collect();
    let mut pairs = Vec::new();
    let mut self_pairs = 0;
    for (i, b) in balls.iter().enumerate() {
        for (j, b1) in balls.iter().enumerate() {
            if b.radius > b1.radius || !members[i].is_subset(&members[j]) {
                continue;
            }
            if i == j {
                self_pairs += 1;
                continue;
            }
            pairs.push(InclusionPair {
                inner: i,
                outer: j,
                kernel: kernel_unchecked(space, lambda, b, b1, &members[i]),
            });
        }
    }
    Ok(RbmoProblem {
        space: space.clone(),
        lambda: *lambda,
        f: f.clone(),
        rho,
        family,
        balls,
        members,
        inflated,
        oscillation,
        pairs,
        self_pairs,
    })
}

impl RbmoProblem {
    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn lambda(&self) -> &DominatingFunction {
        &self.lambda
    }

    pub fn function(&self) -> &SpaceFunction {
        &self.f
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn family(&self) -> &CanonicalBallFamily {
        &self.family
    }

    pub fn balls(&self) -> &[Ball] {
        &self.balls
    }

    pub fn pairs(&self) -> &[InclusionPair] {
        &self.pairs
    }

    pub fn summary(&self) -> ProblemSummary {
        ProblemSummary {
            points: self.space.len(),
            balls: self.balls.len(),
            canonical_balls: self.family.len(),
            inclusion_pairs: self.pairs.len(),
            self_pairs: self.self_pairs,
            rho: self.rho,
            lambda: self.lambda,
        }
    }

    /// Smallest `A` for which the constants `values` are admissible.
    pub fn required_a(&self, values: &[f64]) -> f64 {
        let osc = self
            .oscillation
            .iter()
            .zip(&self.inflated)
            .zip(values)
            .map(|((o, m), &x)| o.eval(x) / m)
            .fold(0.0, f64::max);
        self.pairs
            .iter()
            .map(|p| (values[p.inner] - values[p.outer]).abs() / p.kernel)
            .fold(osc, f64::max)
    }

    /// One-ball relaxation: `A >= min_c sum w |f - c| / mu(rho B)` for every ball.
    pub fn single_ball_lower_bound(&self) -> f64 {
        self.oscillation
            .iter()
            .zip(&self.inflated)
            .map(|(o, m)| o.minimum() / m)
            .fold(0.0, f64::max)
    }

    /// Writes the constraint system `M x <= b` as sparse triplets.
    ///
    /// Column 0 is `A`, column `1 + i` is the constant of ball `i`. Each
    /// oscillation constraint is written as its family of linear pieces
    /// `s f_B - mu(rho B) A <= -t`; each pair as two rows
    /// `±(f_B - f_B1) - K A <= 0`.
    pub fn write_triplets<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "# sparse constraint matrix, rows read  sum_j M[row][col] x[col] <= rhs[row]"
        )?;
        writeln!(
            out,
            "# col 0 = A; col 1+i = f_B of ball i (center, radius listed below)"
        )?;
        for (i, b) in self.balls.iter().enumerate() {
            writeln!(out, "# ball {i} {} {}", self.space.name(b.center), b.radius)?;
        }
        let mut rhs = Vec::new();
        let mut row = 0usize;
        writeln!(out, "# triplets: row col value")?;
        for (i, (o, &m)) in self.oscillation.iter().zip(&self.inflated).enumerate() {
            for j in 0..o.piece_count() {
                let (s, t) = o.piece(j);
                writeln!(out, "{row} 0 {}", -m)?;
                if s != 0.0 {
                    writeln!(out, "{row} {} {s}", i + 1)?;
                }
                rhs.push(-t);
                row += 1;
            }
        }
        for p in &self.pairs {
            for sign in [1.0, -1.0] {
                writeln!(out, "{row} 0 {}", -p.kernel)?;
                writeln!(out, "{row} {} {sign}", p.inner + 1)?;
                writeln!(out, "{row} {} {}", p.outer + 1, -sign)?;
                rhs.push(0.0);
                row += 1;
            }
        }
        writeln!(out, "# rhs: row value")?;
        for (r, v) in rhs.iter().enumerate() {
            writeln!(out, "{r} {v}")?;
        }
        Ok(())
    }
}

/// A bound `A` with one constant per ball satisfying every constraint of a problem.
#[derive(Debug, Clone, Serialize)]
pub struct AdmissibleFamily {
    #[serde(rename = "A")]
    pub a: f64,
    /// Optimum of the final linear relaxation; `a` differs from it only by solver accuracy.
    pub lower_bound: f64,
    pub rho: f64,
    pub balls: Vec<Ball>,
    #[serde(rename = "f_B")]
    pub values: Vec<f64>,
    /// Cutting-plane rounds used.
    pub cuts: usize,
    #[serde(skip)]
    pub(crate) family: CanonicalBallFamily,
}

impl AdmissibleFamily {
    /// `f_B` for an arbitrary ball, through its canonical representative.
    pub fn value_of(&self, space: &Space, ball: &Ball) -> f64 {
        self.values[self.family.index_of(space, ball)]
    }

    pub fn canonical_values(&self) -> &[f64] {
        &self.values[..self.family.len()]
    }

    /// JSON document listing each ball by centre name, radius, members and constant.
    pub fn to_json(&self, space: &Space) -> String {
        #[derive(Serialize)]
        struct Row<'a> {
            center: &'a str,
            radius: f64,
            members: String,
            #[serde(rename = "f_B")]
            value: f64,
        }
        #[derive(Serialize)]
        struct Doc<'a> {
            #[serde(rename = "A")]
            a: f64,
            lower_bound: f64,
            rho: f64,
            balls: Vec<Row<'a>>,
        }
        let doc = Doc {
            a: self.a,
            lower_bound: self.lower_bound,
            rho: self.rho,
            balls: self
                .balls
                .iter()
                .zip(&self.values)
                .map(|(b, &value)| Row {
                    center: space.name(b.center),
                    radius: b.radius,
                    members: space.format_set(&space.open_members(b.center, b.radius)),
                    value,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("families always serialise")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintSlack {
    /// `"oscillation"` or `"regularity"`.
    pub kind: &'static str,
    pub ball: usize,
    /// Outer ball of a regularity constraint.
    pub outer: Option<usize>,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub constraints: usize,
    pub min_slack: f64,
    /// `-SOLVER_SLACK (1 + A)`.
    pub threshold: f64,
    pub passed: bool,
    pub worst: Option<ConstraintSlack>,
}

impl RbmoProblem {
    /// Every constraint evaluated at `family`.
    pub fn slacks(&self, family: &AdmissibleFamily) -> Vec<ConstraintSlack> {
        let a = family.a;
        let v = &family.values;
        let mut rows: Vec<ConstraintSlack> = self
            .oscillation
            .iter()
            .zip(&self.inflated)
            .enumerate()
            .map(|(i, (o, &m))| {
                let lhs = o.eval(v[i]);
                ConstraintSlack {
                    kind: "oscillation",
                    ball: i,
                    outer: None,
                    lhs,
                    rhs: a * m,
                    slack: a * m - lhs,
                }
            })
            .collect();
        rows.extend(self.pairs.iter().map(|p| {
            let lhs = (v[p.inner] - v[p.outer]).abs();
            ConstraintSlack {
                kind: "regularity",
                ball: p.inner,
                outer: Some(p.outer),
                lhs,
                rhs: a * p.kernel,
                slack: a * p.kernel - lhs,
            }
        }));
        rows
    }

    pub fn certify(&self, family: &AdmissibleFamily) -> Certificate {
        let rows = self.slacks(family);
        let threshold = -SOLVER_SLACK * (1.0 + family.a);
        let worst = rows.iter().min_by(|a, b| a.slack.total_cmp(&b.slack)).cloned();
        let min_slack = worst.as_ref().map_or(f64::INFINITY, |w| w.slack);
        Certificate {
            constraints: rows.len(),
            min_slack,
            threshold,
            passed: family.a >= 0.0 && min_slack >= threshold,
            worst,
        }
    }

    /// CSV with columns `kind,ball,outer,lhs,rhs,slack`; balls named `center@radius`.
    pub fn write_slack_csv<W: Write>(&self, family: &AdmissibleFamily, mut out: W) -> std::io::Result<()> {
        let label = |i: usize| format!("{}@{}", self.space.name(self.balls[i].center), self.balls[i].radius);
        writeln!(out, "kind,ball,outer,lhs,rhs,slack")?;
        for r in self.slacks(family) {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.kind,
                label(r.ball),
                r.outer.map(label).unwrap_or_default(),
                r.lhs,
                r.rhs,
                r.slack
            )?;
        }
        Ok(())
    }
}

/// Change of the norm when every gap between breakpoints gets `extra` more radii.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementReport {
    pub extra: usize,
    pub canonical_a: f64,
    pub refined_a: f64,
    pub refined_balls: usize,
    /// `(refined - canonical) / max(canonical, tiny)`.
    pub relative_change: f64,
}

pub fn refinement_stability(
    space: &Space,
    lambda: &DominatingFunction,
    f: &SpaceFunction,
    rho: f64,
    extra: usize,
) -> Result<RefinementReport> {
    let canonical = solve_rbmo(&build_problem(space, lambda, f, rho)?)?;
    let problem = build_refined_problem(space, lambda, f, rho, extra)?;
    let refined = solve_rbmo(&problem)?;
    Ok(RefinementReport {
        extra,
        canonical_a: canonical.a,
        refined_a: refined.a,
        refined_balls: problem.balls.len(),
        relative_change: (refined.a - canonical.a) / canonical.a.max(f64::MIN_POSITIVE),
    })
}
