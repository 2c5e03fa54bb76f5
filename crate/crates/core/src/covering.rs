//! Separated nets, greedy 5r ball selection, packings and doubling diagnostics.
//!
//! Disjointness of balls is always the metric test `d(c1, c2) >= r1 + r2`,
//! which implies disjoint member sets in any metric space.

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::space::{Ball, PointId, PointSet, Space};

/// Greedy maximal `r`-separated subset of `candidates`, scanned in ascending id order.
///
/// Every candidate lies at distance `< r` from some selected point, and
/// selected points are pairwise at distance `>= r`.
pub fn separated_net(space: &Space, candidates: &PointSet, r: f64) -> Result<PointSet> {
    if candidates.is_clear() {
        return Err(Error::InvalidParameter("separated_net needs candidates".into()));
    }
    if !(r > 0.0) {
        return Err(Error::InvalidRadius(r));
    }
    let mut chosen: Vec<PointId> = Vec::new();
    for p in candidates.ones() {
        space.check_point(p)?;
        if chosen.iter().all(|&q| space.dist(p, q) >= r) {
            chosen.push(p);
        }
    }
    Ok(space.point_set(chosen))
}

/// Whether `net` is an `r`-separated subset of `candidates` to which no
/// further candidate can be added.
pub fn is_maximal_net(space: &Space, candidates: &PointSet, net: &PointSet, r: f64) -> bool {
    let picked: Vec<PointId> = net.ones().collect();
    let subset = picked.iter().all(|&p| candidates.contains(p));
    let separated = picked
        .iter()
        .enumerate()
        .all(|(i, &p)| picked[i + 1..].iter().all(|&q| space.dist(p, q) >= r));
    let maximal = candidates
        .ones()
        .filter(|p| !net.contains(*p))
        .all(|p| picked.iter().any(|&q| space.dist(p, q) < r));
    subset && separated && maximal
}

pub fn balls_disjoint(space: &Space, a: &Ball, b: &Ball) -> bool {
    space.dist(a.center, b.center) >= a.radius + b.radius
}

/// Greedy selection by descending radius, ties by centre id: a pairwise
/// disjoint subfamily such that each input ball meets a selected ball of
/// radius at least its own.
pub fn vitali_select(space: &Space, balls: &[Ball]) -> Result<Vec<Ball>> {
    if balls.is_empty() {
        return Err(Error::InvalidParameter("vitali_select needs at least one ball".into()));
    }
    for b in balls {
        space.check_point(b.center)?;
    }
    let mut order: Vec<&Ball> = balls.iter().collect();
    order.sort_by(|a, b| b.radius.total_cmp(&a.radius).then(a.center.cmp(&b.center)));
    let mut chosen: Vec<Ball> = Vec::new();
    for b in order {
        if chosen.iter().all(|s| balls_disjoint(space, s, b)) {
            chosen.push(*b);
        }
    }
    Ok(chosen)
}

/// Outcome of checking a greedy selection against its input.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VitaliCheck {
    pub disjoint: bool,
    /// Every input ball meets a selected ball of at least its radius.
    pub dominated: bool,
    /// Every input ball's members lie in the 5-dilation of some selected ball.
    pub covered: bool,
}

impl VitaliCheck {
    pub fn passed(&self) -> bool {
        self.disjoint && self.dominated && self.covered
    }
}

pub fn check_vitali(space: &Space, input: &[Ball], selected: &[Ball]) -> VitaliCheck {
    let disjoint = selected
        .iter()
        .enumerate()
        .all(|(i, a)| selected[i + 1..].iter().all(|b| balls_disjoint(space, a, b)));
    let dominated = input.iter().all(|b| {
        selected
            .iter()
            .any(|s| s.radius >= b.radius && !balls_disjoint(space, s, b))
    });
    let covered = input.iter().all(|b| {
        let members = space.open_members(b.center, b.radius);
        selected.iter().any(|s| {
            let big = s.dilate(5.0);
            members.ones().all(|y| space.ball_contains(&big, y))
        })
    });
    VitaliCheck {
        disjoint,
        dominated,
        covered,
    }
}

/// Size of a largest packing: exact for small member sets, otherwise bracketed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PackingCount {
    Exact(usize),
    Interval { lower: usize, upper: usize },
}

impl PackingCount {
    pub fn lower(&self) -> usize {
        match *self {
            PackingCount::Exact(v) => v,
            PackingCount::Interval { lower, .. } => lower,
        }
    }

    pub fn upper(&self) -> usize {
        match *self {
            PackingCount::Exact(v) => v,
            PackingCount::Interval { upper, .. } => upper,
        }
    }

    pub fn contains(&self, v: usize) -> bool {
        self.lower() <= v && v <= self.upper()
    }

    fn join(self, other: PackingCount) -> PackingCount {
        match (self, other) {
            (PackingCount::Exact(a), PackingCount::Exact(b)) => PackingCount::Exact(a.max(b)),
            (a, b) => PackingCount::Interval {
                lower: a.lower().max(b.lower()),
                upper: a.upper().max(b.upper()),
            },
        }
    }
}

impl Serialize for PackingCount {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            PackingCount::Exact(v) => s.serialize_u64(v as u64),
            PackingCount::Interval { lower, upper } => [lower, upper].serialize(s),
        }
    }
}

/// Member sets up to this size are packed exactly.
pub const EXACT_PACKING_LIMIT: usize = 12;

/// Pair separation rule for a packing.
#[derive(Debug, Clone, Copy)]
enum Separation {
    /// `d >= s`
    AtLeast(f64),
    /// `d > s`
    Above(f64),
}

impl Separation {
    fn ok(self, d: f64) -> bool {
        match self {
            Separation::AtLeast(s) => d >= s,
            Separation::Above(s) => d > s,
        }
    }
}

fn max_packing(space: &Space, members: &[PointId], sep: Separation) -> PackingCount {
    if members.len() <= EXACT_PACKING_LIMIT {
        let m = members.len();
        let conflicts: Vec<u32> = (0..m)
            .map(|i| {
                (0..m)
                    .filter(|&j| j != i && !sep.ok(space.dist(members[i], members[j])))
                    .fold(0u32, |acc, j| acc | (1 << j))
            })
            .collect();
        return PackingCount::Exact(max_independent(&conflicts, (1u32 << m) - 1));
    }
    // A greedy packing is a lower bound. Points of any packing sit in distinct
    // cells of a greedy net at half the separation, which gives the upper bound.
    let greedy = |keep: &dyn Fn(f64) -> bool| {
        let mut chosen: Vec<PointId> = Vec::new();
        for &p in members {
            if chosen.iter().all(|&q| keep(space.dist(p, q))) {
                chosen.push(p);
            }
        }
        chosen.len()
    };
    let lower = greedy(&|d| sep.ok(d));
    let upper = match sep {
        Separation::AtLeast(s) => greedy(&|d| d >= s / 2.0),
        Separation::Above(s) => greedy(&|d| d > s / 2.0),
    };
    PackingCount::Interval { lower, upper }
}

fn max_independent(conflicts: &[u32], candidates: u32) -> usize {
    if candidates == 0 {
        return 0;
    }
    let v = candidates.trailing_zeros() as usize;
    let rest = candidates & !(1 << v);
    let with = 1 + max_independent(conflicts, rest & !conflicts[v]);
    if conflicts[v] & rest == 0 {
        return with;
    }
    with.max(max_independent(conflicts, rest))
}

/// Largest number of members of `ball` carrying pairwise disjoint balls of
/// radius `delta * r`, i.e. pairwise at distance `>= 2 delta r`.
pub fn packing_bound(space: &Space, ball: &Ball, delta: f64) -> Result<PackingCount> {
    check_delta(delta)?;
    let members: Vec<PointId> = space.ball_members(ball)?.ones().collect();
    Ok(max_packing(
        space,
        &members,
        Separation::AtLeast(2.0 * delta * ball.radius),
    ))
}

/// Supremum of [`packing_bound`] over every ball of the space, with a witness.
///
/// Around `x` the ball `B(x, r)` with `rho_k < r <= rho_{k+1}` has fixed
/// members while the separation `2 delta r` decreases to `2 delta rho_k`, so
/// the supremum over that interval is the packing of the closed
/// `rho_k`-ball under the strict separation `d > 2 delta rho_k`.
pub fn packing_sup(space: &Space, delta: f64) -> Result<(PackingCount, PackingWitness)> {
    check_delta(delta)?;
    let mut best = PackingCount::Exact(1);
    let mut witness = PackingWitness {
        center: 0,
        radius_limit: 0.0,
    };
    for x in 0..space.len() {
        let order = space.radial_order(x);
        for (k, &rho) in space.breakpoints(x).iter().enumerate().skip(1) {
            let members = &order[..space.closed_count_at(x, k)];
            let count = max_packing(space, members, Separation::Above(2.0 * delta * rho));
            if count.upper() > best.upper() {
                witness = PackingWitness {
                    center: x,
                    radius_limit: rho,
                };
            }
            best = best.join(count);
        }
    }
    Ok((best, witness))
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("delta must lie in (0,1), got {delta}")))
    }
}

/// Ball approached from above: radii decreasing to `radius_limit` around `center`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PackingWitness {
    pub center: PointId,
    pub radius_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoublingDiagnostics {
    /// Bound on the number of disjoint quarter-radius balls centred in any ball.
    #[serde(rename = "N_bound")]
    pub n_bound: usize,
    /// Which geometric-doubling condition produced `n_bound`.
    pub n_condition: &'static str,
    pub n_exponent: f64,
    pub per_delta_packing: Vec<(f64, PackingCount)>,
    /// `sup mu(2B) / mu(B)` over all balls.
    #[serde(rename = "C_mu")]
    pub c_mu: f64,
    pub witnesses: DiagnosticWitnesses,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticWitnesses {
    pub n_bound: PackingWitness,
    /// A ball at which `mu(2B) / mu(B)` comes arbitrarily close to `C_mu`.
    pub c_mu: Ball,
}

impl DoublingDiagnostics {
    /// `C_mu` at or below `limit`.
    pub fn is_measure_doubling(&self, limit: f64) -> bool {
        self.c_mu <= limit
    }

    /// Packing bound `N delta^{-n}` implied by the quarter-radius count.
    pub fn packing_envelope(&self, delta: f64) -> f64 {
        self.n_bound as f64 * delta.powf(-self.n_exponent)
    }
}

pub const TABULATED_DELTAS: [f64; 3] = [0.5, 0.25, 0.125];

pub fn doubling_diagnostics(space: &Space) -> DoublingDiagnostics {
    let mut per_delta_packing = Vec::new();
    let mut quarter = None;
    for delta in TABULATED_DELTAS {
        let (count, witness) = packing_sup(space, delta).expect("tabulated deltas are valid");
        if delta == 0.25 {
            quarter = Some((count, witness));
        }
        per_delta_packing.push((delta, count));
    }
    let (count, n_witness) = quarter.expect("quarter radius is tabulated");
    let n_bound = count.upper();
    let (c_mu, c_mu_witness) = measure_doubling_constant(space);
    DoublingDiagnostics {
        n_bound,
        n_condition: "quarter_radius_packing",
        n_exponent: (n_bound as f64).log2(),
        per_delta_packing,
        c_mu,
        witnesses: DiagnosticWitnesses {
            n_bound: n_witness,
            c_mu: c_mu_witness,
        },
    }
}

/// `sup mu(2B) / mu(B)` over all balls and a ball attaining the supremum in the limit.
///
/// On `rho_k < r <= rho_{k+1}` the denominator is the closed `rho_k` mass
/// while the numerator grows with `r`, so the supremum is taken at
/// `r = rho_{k+1}`, giving `mu(B(x, 2 rho_{k+1})) / mu(closed B(x, rho_k))`.
pub fn measure_doubling_constant(space: &Space) -> (f64, Ball) {
    let mut best = 1.0;
    let mut witness = Ball {
        center: 0,
        radius: crate::space::CanonicalBallFamily::new(space).balls()[0].radius,
    };
    for x in 0..space.len() {
        let bp = space.breakpoints(x);
        for k in 0..bp.len() - 1 {
            let ratio = space.open_mass(x, 2.0 * bp[k + 1]) / space.closed_mass(x, bp[k]);
            if ratio > best {
                best = ratio;
                witness = Ball {
                    center: x,
                    radius: bp[k + 1],
                };
            }
        }
    }
    (best, witness)
}
