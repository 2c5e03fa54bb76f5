//! Finite metric measure spaces: weighted point clouds with an explicit metric.
//!
//! Every ball is open, `B(x, r) = { y : d(y, x) < r }`, and carries its
//! centre and radius as identity. All integrals are finite sums over atoms.

pub(crate) mod canonical;
mod document;
mod generate;

pub use canonical::{refinement_radii, CanonicalBallFamily};
pub use document::{MetricKind, SpaceDocument};
pub use generate::{Generator, CLUSTER_WEIGHT};

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerance::TRIANGLE_RTOL;

pub type PointId = usize;

/// A set of points of a space, indexed by [`PointId`].
pub type PointSet = FixedBitSet;

/// An open ball with a fixed centre and radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: PointId,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: PointId, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidRadius(radius));
        }
        Ok(Self { center, radius })
    }

    /// Concentric dilation `factor * B`.
    pub fn dilate(&self, factor: f64) -> Ball {
        debug_assert!(factor > 0.0);
        Ball {
            center: self.center,
            radius: self.radius * factor,
        }
    }
}

/// Distances from one centre, sorted, with prefix masses.
#[derive(Debug, Clone)]
struct RadialProfile {
    /// Points ordered by distance (ties by id).
    order: Vec<PointId>,
    dists: Vec<f64>,
    /// `cum[i]` is the mass of the first `i` points of `order`.
    cum: Vec<f64>,
    /// Distinct distances, ascending; `breakpoints[0] == 0`.
    breakpoints: Vec<f64>,
    /// Number of points at distance `<= breakpoints[k]`.
    closed_counts: Vec<usize>,
}

impl RadialProfile {
    fn build(center: PointId, n: usize, dist: &[f64], weights: &[f64]) -> Self {
        let row = &dist[center * n..(center + 1) * n];
        let mut order: Vec<PointId> = (0..n).collect();
        order.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
        let dists: Vec<f64> = order.iter().map(|&p| row[p]).collect();
        let mut cum = Vec::with_capacity(n + 1);
        cum.push(0.0);
        for &p in &order {
            cum.push(cum.last().unwrap() + weights[p]);
        }
        let mut breakpoints = Vec::new();
        let mut closed_counts = Vec::new();
        for (i, &d) in dists.iter().enumerate() {
            if breakpoints.last() == Some(&d) {
                *closed_counts.last_mut().unwrap() = i + 1;
            } else {
                breakpoints.push(d);
                closed_counts.push(i + 1);
            }
        }
        Self {
            order,
            dists,
            cum,
            breakpoints,
            closed_counts,
        }
    }

    /// Number of points with `d < r`.
    fn open_count(&self, r: f64) -> usize {
        self.dists.partition_point(|&d| d < r)
    }

    /// Number of points with `d <= r`.
    fn closed_count(&self, r: f64) -> usize {
        self.dists.partition_point(|&d| d <= r)
    }
}

/// A finite metric measure space.
#[derive(Debug, Clone)]
pub struct Space {
    names: Vec<String>,
    dist: Vec<f64>,
    weights: Vec<f64>,
    profiles: Vec<RadialProfile>,
}

impl Space {
    /// Builds and validates a space from a full distance matrix.
    pub fn from_matrix(names: Vec<String>, dist: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let n = weights.len();
        if n == 0 {
            return Err(Error::Document("a space needs at least one point".into()));
        }
        if names.len() != n {
            return Err(Error::Document(format!("{} names for {} weights", names.len(), n)));
        }
        if dist.len() != n || dist.iter().any(|row| row.len() != n) {
            return Err(Error::Document(format!("distance matrix must be {n}x{n}")));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::NonPositiveWeight(names[i].clone(), w));
            }
        }
        for i in 0..n {
            for j in 0..n {
                let d = dist[i][j];
                if !d.is_finite() || d < 0.0 {
                    return Err(Error::InvalidDistance(
                        names[i].clone(),
                        names[j].clone(),
                        format!("{d} is not a finite nonnegative number"),
                    ));
                }
                if i == j && d != 0.0 {
                    return Err(Error::InvalidDistance(
                        names[i].clone(),
                        names[j].clone(),
                        format!("diagonal entry {d} must be zero"),
                    ));
                }
                if i != j && d == 0.0 {
                    return Err(Error::InvalidDistance(
                        names[i].clone(),
                        names[j].clone(),
                        "distinct points at distance zero".into(),
                    ));
                }
                if d != dist[j][i] {
                    return Err(Error::Asymmetric(names[i].clone(), names[j].clone()));
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let via = dist[i][j] + dist[j][k];
                    if dist[i][k] > via + TRIANGLE_RTOL * via {
                        return Err(Error::TriangleViolation {
                            a: names[i].clone(),
                            b: names[j].clone(),
                            c: names[k].clone(),
                            ac: dist[i][k],
                            via,
                        });
                    }
                }
            }
        }
        let flat: Vec<f64> = dist.into_iter().flatten().collect();
        Ok(Self::assemble(names, flat, weights))
    }

    /// Builds a space from coordinates with the Euclidean metric.
    pub fn from_coords(names: Vec<String>, coords: &[Vec<f64>], weights: Vec<f64>) -> Result<Self> {
        let dim = coords.first().map_or(0, Vec::len);
        if coords.iter().any(|c| c.len() != dim) {
            return Err(Error::Document("coordinates have mixed dimensions".into()));
        }
        if coords.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Document("coordinates must be finite".into()));
        }
        let dist = coords
            .iter()
            .map(|a| coords.iter().map(|b| euclidean(a, b)).collect())
            .collect();
        Self::from_matrix(names, dist, weights)
    }

    fn assemble(names: Vec<String>, dist: Vec<f64>, weights: Vec<f64>) -> Self {
        let n = weights.len();
        let profiles = (0..n).map(|c| RadialProfile::build(c, n, &dist, &weights)).collect();
        Self {
            names,
            dist,
            weights,
            profiles,
        }
    }

    /// Default names `p0, p1, ...`.
    pub fn default_names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i}")).collect()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, p: PointId) -> &str {
        &self.names[p]
    }

    pub fn index_of(&self, name: &str) -> Option<PointId> {
        self.names.iter().position(|n| n == name)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, p: PointId) -> f64 {
        self.weights[p]
    }

    pub fn dist(&self, a: PointId, b: PointId) -> f64 {
        self.dist[a * self.len() + b]
    }

    /// Distance matrix as rows.
    pub fn dist_rows(&self) -> Vec<Vec<f64>> {
        self.dist.chunks(self.len()).map(<[f64]>::to_vec).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.profiles[0].cum[self.len()]
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest pairwise distance.
    pub fn diameter(&self) -> f64 {
        self.profiles
            .iter()
            .map(|p| *p.breakpoints.last().unwrap())
            .fold(0.0, f64::max)
    }

    /// Smallest positive pairwise distance, if the space has two points.
    pub fn min_separation(&self) -> Option<f64> {
        self.profiles
            .iter()
            .filter_map(|p| p.breakpoints.get(1).copied())
            .min_by(f64::total_cmp)
    }

    /// Sorted distinct distances from `center`, starting with 0.
    pub fn breakpoints(&self, center: PointId) -> &[f64] {
        &self.profiles[center].breakpoints
    }

    /// Number of points at distance `<= breakpoints(center)[k]`.
    pub fn closed_count_at(&self, center: PointId, k: usize) -> usize {
        self.profiles[center].closed_counts[k]
    }

    pub fn check_point(&self, p: PointId) -> Result<()> {
        if p < self.len() {
            Ok(())
        } else {
            Err(Error::UnknownPoint(p.to_string()))
        }
    }

    /// `mu(B(x, r))` for the open ball; `r <= 0` gives 0.
    pub fn open_mass(&self, x: PointId, r: f64) -> f64 {
        let prof = &self.profiles[x];
        prof.cum[prof.open_count(r)]
    }

    /// `mu({ y : d(x, y) <= r })`.
    pub fn closed_mass(&self, x: PointId, r: f64) -> f64 {
        let prof = &self.profiles[x];
        prof.cum[prof.closed_count(r)]
    }

    /// Mass of the first `count` points by distance from `x`.
    pub(crate) fn prefix_mass(&self, x: PointId, count: usize) -> f64 {
        self.profiles[x].cum[count]
    }

    /// Points ordered by distance from `x`.
    pub(crate) fn radial_order(&self, x: PointId) -> &[PointId] {
        &self.profiles[x].order
    }

    pub fn open_members(&self, x: PointId, r: f64) -> PointSet {
        let prof = &self.profiles[x];
        let mut set = PointSet::with_capacity(self.len());
        for &p in &prof.order[..prof.open_count(r)] {
            set.insert(p);
        }
        set
    }

    pub fn ball_members(&self, ball: &Ball) -> Result<PointSet> {
        self.check_point(ball.center)?;
        Ok(self.open_members(ball.center, ball.radius))
    }

    pub fn ball_measure(&self, ball: &Ball) -> Result<f64> {
        self.check_point(ball.center)?;
        Ok(self.open_mass(ball.center, ball.radius))
    }

    pub fn ball_contains(&self, ball: &Ball, y: PointId) -> bool {
        self.dist(ball.center, y) < ball.radius
    }

    pub fn set_mass(&self, set: &PointSet) -> f64 {
        set.ones().map(|p| self.weights[p]).sum()
    }

    /// `sum_{y in B} w_y f(y)`.
    pub fn integrate(&self, f: &SpaceFunction, ball: &Ball) -> Result<f64> {
        self.check_function(f)?;
        self.check_point(ball.center)?;
        let prof = &self.profiles[ball.center];
        Ok(prof.order[..prof.open_count(ball.radius)]
            .iter()
            .map(|&p| self.weights[p] * f.values[p])
            .sum())
    }

    pub fn average(&self, f: &SpaceFunction, ball: &Ball) -> Result<f64> {
        Ok(self.integrate(f, ball)? / self.ball_measure(ball)?)
    }

    pub fn set_average(&self, f: &SpaceFunction, set: &PointSet) -> f64 {
        let (num, den) = set.ones().fold((0.0, 0.0), |(s, m), p| {
            (s + self.weights[p] * f.values[p], m + self.weights[p])
        });
        num / den
    }

    pub fn check_function(&self, f: &SpaceFunction) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::FunctionLength {
                expected: self.len(),
                got: f.len(),
            });
        }
        Ok(())
    }

    /// The induced subspace on `subset`, with points renumbered in ascending order.
    pub fn restrict(&self, subset: &PointSet) -> Result<Space> {
        let keep: Vec<PointId> = subset.ones().filter(|&p| p < self.len()).collect();
        if keep.is_empty() {
            return Err(Error::EmptySubset);
        }
        let names = keep.iter().map(|&p| self.names[p].clone()).collect();
        let weights = keep.iter().map(|&p| self.weights[p]).collect();
        let mut dist = Vec::with_capacity(keep.len() * keep.len());
        for &a in &keep {
            for &b in &keep {
                dist.push(self.dist(a, b));
            }
        }
        Ok(Self::assemble(names, dist, weights))
    }

    pub fn point_set(&self, points: impl IntoIterator<Item = PointId>) -> PointSet {
        let mut set = PointSet::with_capacity(self.len());
        for p in points {
            set.insert(p);
        }
        set
    }

    pub fn full_set(&self) -> PointSet {
        let mut set = PointSet::with_capacity(self.len());
        set.insert_range(..);
        set
    }

    pub fn format_set(&self, set: &PointSet) -> String {
        set.ones().map(|p| self.names[p].as_str()).collect::<Vec<_>>().join(";")
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// A real function on the points of a space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpaceFunction {
    values: Vec<f64>,
}

impl SpaceFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(i));
        }
        Ok(Self { values })
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self { values: vec![c; n] }
    }

    /// Indicator of one point.
    pub fn spike(n: usize, at: PointId) -> Self {
        let mut values = vec![0.0; n];
        values[at] = 1.0;
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.values.windows(2).all(|w| w[0] == w[1])
    }

    pub fn map(&self, g: impl Fn(f64) -> f64) -> Self {
        Self {
            values: self.values.iter().map(|&v| g(v)).collect(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn l1_norm(&self, space: &Space) -> f64 {
        self.values.iter().zip(space.weights()).map(|(v, w)| w * v.abs()).sum()
    }
}

impl std::ops::Index<PointId> for SpaceFunction {
    type Output = f64;
    fn index(&self, p: PointId) -> &f64 {
        &self.values[p]
    }
}
