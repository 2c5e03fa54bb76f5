//! Stopping-ball decomposition and exponential tails of RBMO functions.
//!
//! Around a ball `B0` with constant `f_B0`, every point where `f` deviates
//! from `f_B0` by more than `2L` picks the largest doubling ball
//! `B(x, alpha^-i r)` inside `sqrt(rho) B0` whose constant deviates by more
//! than `L`. A greedy disjoint subfamily is selected, and its 5-dilations
//! become the balls of the next level. When the mass of the next level is at
//! most half of the current one at every node, the measure of
//! `{|f - f_B0| > 2nL}` is at most `2^-n mu(rho B0)`.

use std::io::Write;

use serde::{Serialize, Serializer};
use statrs::function::gamma::gamma;

use crate::covering::{balls_disjoint, vitali_select};
use crate::dominating::DoublingParams;
use crate::error::{Error, Result};
use crate::rbmo::AdmissibleFamily;
use crate::space::{Ball, PointId, Space, SpaceFunction};
use crate::tolerance::le_rounded;

pub const DEPTH_CAP: usize = 60;
/// `L` is searched over `A 2^k` for `k = 0..=L_GRID_STEPS`.
pub const L_GRID_STEPS: u32 = 20;

/// `mu({x in B0 : |f(x) - f_B0| > t})` with `f_B0` taken from the family.
pub fn tail_distribution(
    space: &Space,
    f: &SpaceFunction,
    family: &AdmissibleFamily,
    b0: &Ball,
    t: f64,
) -> Result<f64> {
    let members = space.ball_members(b0)?;
    let c = family.value_of(space, b0);
    Ok(members
        .ones()
        .filter(|&x| (f[x] - c).abs() > t)
        .map(|x| space.weight(x))
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoppingBall {
    pub ball: Ball,
    /// The canonical ball whose constant stands for `ball`.
    pub canonical: Ball,
    #[serde(rename = "f_B")]
    pub value: f64,
    /// `L < |f_B - f_B0| <= 3L/2`.
    pub in_band: bool,
    /// Average of `|f - f_B0|` over the ball.
    pub mean_deviation: f64,
    /// `mean_deviation > L / 2`.
    pub mean_ok: bool,
}

/// One application of the stopping rule around a ball.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition {
    pub ball: Ball,
    #[serde(rename = "f_B0")]
    pub value: f64,
    #[serde(rename = "L")]
    pub l: f64,
    /// Balls chosen for points above `2L`, before selection.
    pub candidates: usize,
    /// The selected, pairwise disjoint stopping balls.
    pub stopping: Vec<StoppingBall>,
    /// Their 5-dilations.
    pub children: Vec<Ball>,
    /// `sum mu(rho * child)`
    pub mass: f64,
    /// `mu(rho B0) / 2`
    pub budget: f64,
    pub mass_ok: bool,
    pub disjoint: bool,
    pub inside: bool,
    /// `{|f - f_B0| > nL} ⊆ ∪ {y in child : |f(y) - f_child| > (n-2)L}` for every `n >= 2`.
    pub containment: bool,
}

impl Decomposition {
    pub fn passed(&self) -> bool {
        self.mass_ok && self.disjoint && self.inside && self.containment
    }
}

fn check_params(rho: f64, params: &DoublingParams) -> Result<()> {
    if !(rho.is_finite() && rho > 1.0) {
        return Err(Error::InvalidParameter(format!("rho must exceed 1, got {rho}")));
    }
    if (params.alpha - 5.0 * rho).abs() > 1e-12 * params.alpha {
        return Err(Error::InvalidParameter(format!(
            "alpha must equal 5 rho = {}, got {}",
            5.0 * rho,
            params.alpha
        )));
    }
    Ok(())
}

/// Radii `alpha^-i r`, stopping once both the ball and its `alpha`-dilation are `{x}`.
fn shrinking_balls(space: &Space, x: PointId, r: f64, alpha: f64) -> Vec<Ball> {
    let nearest = space.breakpoints(x).get(1).copied();
    let mut out = Vec::new();
    let mut radius = r;
    loop {
        out.push(Ball { center: x, radius });
        match nearest {
            Some(rho1) if alpha * radius > rho1 => radius /= alpha,
            _ => return out,
        }
    }
}

pub fn jn_decompose(
    space: &Space,
    f: &SpaceFunction,
    family: &AdmissibleFamily,
    b0: &Ball,
    rho: f64,
    params: &DoublingParams,
    l: f64,
) -> Result<Decomposition> {
    check_params(rho, params)?;
    if !(l.is_finite() && l > 0.0) {
        return Err(Error::InvalidParameter(format!("L must be positive, got {l}")));
    }
    space.check_function(f)?;
    let members = space.ball_members(b0)?;
    let c0 = family.value_of(space, b0);
    let envelope = space.open_members(b0.center, rho.sqrt() * b0.radius);

    let mut candidates = Vec::new();
    for x in members.ones().filter(|&x| (f[x] - c0).abs() > 2.0 * l) {
        let found = shrinking_balls(space, x, b0.radius, params.alpha)
            .into_iter()
            .find(|b| {
                params.is_doubling(space, b)
                    && space.open_members(b.center, b.radius).is_subset(&envelope)
                    && (family.value_of(space, b) - c0).abs() > l
            });
        match found {
            Some(b) => candidates.push(b),
            None => return Err(Error::NoStoppingBall { point: x, l }),
        }
    }
    let selected = if candidates.is_empty() {
        Vec::new()
    } else {
        vitali_select(space, &candidates)?
    };

    let stopping: Vec<StoppingBall> = selected
        .iter()
        .map(|b| {
            let value = family.value_of(space, b);
            let gap = (value - c0).abs();
            let inner = space.open_members(b.center, b.radius);
            let dev: f64 = inner.ones().map(|y| space.weight(y) * (f[y] - c0).abs()).sum();
            let mean_deviation = dev / space.set_mass(&inner);
            StoppingBall {
                ball: *b,
                canonical: family.family.canonicalize(space, b),
                value,
                in_band: gap > l && gap <= 1.5 * l,
                mean_deviation,
                mean_ok: mean_deviation > 0.5 * l,
            }
        })
        .collect();
    let children: Vec<Ball> = selected.iter().map(|b| b.dilate(5.0)).collect();
    let mass: f64 = children.iter().map(|c| space.open_mass(c.center, rho * c.radius)).sum();
    let budget = 0.5 * space.open_mass(b0.center, rho * b0.radius);
    let disjoint = selected
        .iter()
        .enumerate()
        .all(|(i, a)| selected[i + 1..].iter().all(|b| balls_disjoint(space, a, b)));
    let inside = selected
        .iter()
        .all(|b| space.open_members(b.center, b.radius).is_subset(&envelope));

    let child_values: Vec<f64> = children.iter().map(|c| family.value_of(space, c)).collect();
    let max_dev = members.ones().map(|x| (f[x] - c0).abs()).fold(0.0, f64::max);
    let mut containment = true;
    let mut n = 2u32;
    while f64::from(n) * l < max_dev {
        let t = f64::from(n) * l;
        let slack = f64::from(n - 2) * l;
        containment &= members.ones().filter(|&x| (f[x] - c0).abs() > t).all(|x| {
            children
                .iter()
                .zip(&child_values)
                .any(|(c, &v)| space.ball_contains(c, x) && (f[x] - v).abs() > slack)
        });
        n += 1;
    }

    Ok(Decomposition {
        ball: *b0,
        value: c0,
        l,
        candidates: candidates.len(),
        stopping,
        children,
        mass,
        budget,
        mass_ok: le_rounded(mass, budget),
        disjoint,
        inside,
        containment,
    })
}

/// All nodes of the recursive decomposition, grouped by depth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionTree {
    #[serde(rename = "L")]
    pub l: f64,
    pub depths: Vec<Vec<Decomposition>>,
    pub depth_capped: bool,
}

impl DecompositionTree {
    pub fn passed(&self) -> bool {
        !self.depth_capped && self.depths.iter().flatten().all(Decomposition::passed)
    }
}

pub fn decompose_recursively(
    space: &Space,
    f: &SpaceFunction,
    family: &AdmissibleFamily,
    b0: &Ball,
    rho: f64,
    params: &DoublingParams,
    l: f64,
) -> Result<DecompositionTree> {
    let mut depths = Vec::new();
    let mut frontier = vec![*b0];
    while !frontier.is_empty() {
        if depths.len() == DEPTH_CAP {
            return Ok(DecompositionTree {
                l,
                depths,
                depth_capped: true,
            });
        }
        let level: Vec<Decomposition> = frontier
            .iter()
            .map(|b| jn_decompose(space, f, family, b, rho, params, l))
            .collect::<Result<_>>()?;
        frontier = level.iter().flat_map(|d| d.children.iter().copied()).collect();
        depths.push(level);
    }
    Ok(DecompositionTree {
        l,
        depths,
        depth_capped: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LSearchStep {
    #[serde(rename = "L")]
    pub l: f64,
    pub outcome: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LSearch {
    #[serde(rename = "L")]
    pub l: f64,
    /// `L / A`, the empirical constant of the argument.
    pub ratio: f64,
    pub cap_hit: bool,
    pub trace: Vec<LSearchStep>,
}

/// Smallest `L = A 2^k` whose recursive decomposition succeeds at every node.
pub fn l_search(
    space: &Space,
    f: &SpaceFunction,
    family: &AdmissibleFamily,
    b0: &Ball,
    rho: f64,
    params: &DoublingParams,
) -> Result<LSearch> {
    check_params(rho, params)?;
    let a = family.a;
    if a == 0.0 {
        return Ok(LSearch {
            l: 0.0,
            ratio: 1.0,
            cap_hit: false,
            trace: Vec::new(),
        });
    }
    let mut trace = Vec::new();
    for k in 0..=L_GRID_STEPS {
        let l = a * 2f64.powi(k as i32);
        let outcome = match decompose_recursively(space, f, family, b0, rho, params, l) {
            Ok(tree) if tree.passed() => {
                trace.push(LSearchStep {
                    l,
                    outcome: format!("ok, depth {}", tree.depths.len()),
                });
                return Ok(LSearch {
                    l,
                    ratio: l / a,
                    cap_hit: false,
                    trace,
                });
            }
            Ok(tree) if tree.depth_capped => "depth cap reached".to_string(),
            Ok(_) => "a node failed its checks".to_string(),
            Err(Error::NoStoppingBall { point, .. }) => {
                format!("no stopping ball for {}", space.name(point))
            }
            Err(e) => return Err(e),
        };
        trace.push(LSearchStep { l, outcome });
    }
    let l = a * 2f64.powi(L_GRID_STEPS as i32);
    Ok(LSearch {
        l,
        ratio: l / a,
        cap_hit: true,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DepthRecord {
    pub depth: usize,
    pub balls: Vec<Ball>,
    /// `sum mu(rho B)` over the balls at this depth.
    pub mass: f64,
    /// `2^-depth mu(rho B0)`
    pub bound: f64,
    /// `mass <= previous mass / 2`; true at depth 0.
    pub halving: bool,
    pub bound_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DyadicTail {
    pub n: u32,
    pub t: f64,
    pub tail: f64,
    pub bound: f64,
    pub passed: bool,
}

fn serialize_rate<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JnReport {
    #[serde(rename = "B0")]
    pub b0: Ball,
    pub rho: f64,
    pub params: DoublingParams,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub search: LSearch,
    pub levels: Vec<DepthRecord>,
    pub nodes: Vec<Vec<Decomposition>>,
    /// `(t, tail(t))` over the requested grid.
    pub tail: Vec<(f64, f64)>,
    pub dyadic: Vec<DyadicTail>,
    /// `mu(rho B0)`
    pub inflated_mass: f64,
    /// Largest `c` with `tail(t) <= 2 mu(rho B0) exp(-c t / A)` on the grid; `"inf"` when unconstrained.
    #[serde(serialize_with = "serialize_rate")]
    pub c_fit: f64,
    /// `ln 2 / (2 L / A)`
    pub c_proof: f64,
    pub c_fit_ok: bool,
}

impl JnReport {
    pub fn passed(&self) -> bool {
        !self.search.cap_hit
            && self.levels.iter().all(|l| l.halving && l.bound_ok)
            && self.nodes.iter().flatten().all(Decomposition::passed)
            && self.dyadic.iter().all(|d| d.passed)
            && self.c_fit_ok
    }

    /// `2 mu(rho B0) exp(-c_proof t / A)`
    pub fn envelope(&self, t: f64) -> f64 {
        2.0 * self.inflated_mass * (-self.c_proof * t / self.a).exp()
    }

    /// CSV with columns `t,tail,envelope`; header only when `A = 0`.
    pub fn write_tail_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,tail,envelope")?;
        for &(t, tail) in &self.tail {
            writeln!(out, "{t},{tail},{}", self.envelope(t))?;
        }
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
pub fn verify_jn(
    space: &Space,
    f: &SpaceFunction,
    family: &AdmissibleFamily,
    b0: &Ball,
    rho: f64,
    params: &DoublingParams,
    t_grid: &[f64],
) -> Result<JnReport> {
    let search = l_search(space, f, family, b0, rho, params)?;
    let a = family.a;
    let l = search.l;
    let inflated_mass = space.open_mass(b0.center, rho * b0.radius);
    let tree = if a > 0.0 {
        decompose_recursively(space, f, family, b0, rho, params, l)?
    } else {
        DecompositionTree {
            l,
            depths: Vec::new(),
            depth_capped: false,
        }
    };

    let mut levels = vec![DepthRecord {
        depth: 0,
        balls: vec![*b0],
        mass: inflated_mass,
        bound: inflated_mass,
        halving: true,
        bound_ok: true,
    }];
    for (depth, nodes) in tree.depths.iter().enumerate() {
        let balls: Vec<Ball> = nodes.iter().flat_map(|d| d.children.iter().copied()).collect();
        if balls.is_empty() {
            break;
        }
        let mass = nodes.iter().map(|d| d.mass).sum();
        let bound = inflated_mass * 0.5f64.powi(depth as i32 + 1);
        let previous = levels.last().unwrap().mass;
        levels.push(DepthRecord {
            depth: depth + 1,
            balls,
            mass,
            bound,
            halving: le_rounded(mass, 0.5 * previous),
            bound_ok: le_rounded(mass, bound),
        });
    }

    let tail_at = |t: f64| tail_distribution(space, f, family, b0, t);
    let mut tail = Vec::new();
    let mut dyadic = Vec::new();
    let mut c_fit = f64::INFINITY;
    let mut c_proof = f64::INFINITY;
    if a > 0.0 {
        for &t in t_grid {
            let value = tail_at(t)?;
            if t > 0.0 && value > 0.0 {
                c_fit = c_fit.min(a / t * (2.0 * inflated_mass / value).ln());
            }
            tail.push((t, value));
        }
        c_proof = std::f64::consts::LN_2 / (2.0 * l / a);
        for n in 1u32.. {
            let t = 2.0 * f64::from(n) * l;
            let value = tail_at(t)?;
            let bound = inflated_mass * 0.5f64.powi(n as i32);
            dyadic.push(DyadicTail {
                n,
                t,
                tail: value,
                bound,
                passed: le_rounded(value, bound),
            });
            if value == 0.0 {
                break;
            }
        }
    }
    Ok(JnReport {
        b0: *b0,
        rho,
        params: *params,
        a,
        l,
        search,
        levels,
        nodes: tree.depths,
        tail,
        dyadic,
        inflated_mass,
        c_fit,
        c_proof,
        c_fit_ok: c_fit >= c_proof * (1.0 - 1e-12),
    })
}

/// `((1 / mu(rho B0)) sum_{x in B0} w_x |f(x) - f_B0|^p)^(1/p)`.
pub fn lp_oscillation(
    space: &Space,
    f: &SpaceFunction,
    family: &AdmissibleFamily,
    b0: &Ball,
    p: f64,
    rho: f64,
) -> Result<f64> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::InvalidParameter(format!("p must be at least 1, got {p}")));
    }
    let members = space.ball_members(b0)?;
    let c = family.value_of(space, b0);
    let sum: f64 = members.ones().map(|x| space.weight(x) * (f[x] - c).abs().powf(p)).sum();
    Ok((sum / space.open_mass(b0.center, rho * b0.radius)).powf(1.0 / p))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpCheck {
    pub p: f64,
    pub value: f64,
    /// `2 (Gamma(p + 1) (2L / (A ln 2))^p)^(1/p)`
    pub constant: f64,
    pub bound: f64,
    pub passed: bool,
}

/// Integrates the tail envelope `2 mu(rho B0) 2^(-t / 2L)` against `p t^(p-1)`.
pub fn lp_check(value: f64, p: f64, a: f64, l: f64) -> LpCheck {
    let (constant, bound) = if a > 0.0 {
        let c = 2.0 * (gamma(p + 1.0) * (2.0 * l / (a * std::f64::consts::LN_2)).powf(p)).powf(1.0 / p);
        (c, c * a)
    } else {
        (0.0, 0.0)
    };
    LpCheck {
        p,
        value,
        constant,
        bound,
        passed: le_rounded(value, bound),
    }
}
