//! Finite enumeration of all open balls of a space.
//!
//! Around a centre `c` with distinct distances `0 = rho_0 < rho_1 < ... < rho_m`,
//! an open ball `B(c, r)` has member set `{ y : d(c, y) <= rho_k }` exactly when
//! `rho_k < r <= rho_{k+1}`. The family keeps one representative per such
//! interval, at the midpoint `(rho_k + rho_{k+1}) / 2`, and `2 rho_m` for the
//! last, unbounded interval. No representative radius ever equals a distance,
//! so membership never sits on a boundary.

use std::io::Write;

use super::{Ball, PointId, PointSet, Space};

#[derive(Debug, Clone)]
pub struct CanonicalBallFamily {
    balls: Vec<Ball>,
    /// `offsets[c]..offsets[c + 1]` indexes the balls centred at `c`.
    offsets: Vec<usize>,
}

/// End of the virtual last interval around a centre whose largest distance is `rho_max`.
pub(crate) fn outer_bound(rho_max: f64) -> f64 {
    if rho_max > 0.0 {
        3.0 * rho_max
    } else {
        4.0
    }
}

impl CanonicalBallFamily {
    pub fn new(space: &Space) -> Self {
        let mut balls = Vec::new();
        let mut offsets = Vec::with_capacity(space.len() + 1);
        for c in 0..space.len() {
            offsets.push(balls.len());
            let bp = space.breakpoints(c);
            for k in 0..bp.len() {
                let hi = bp.get(k + 1).copied().unwrap_or_else(|| outer_bound(bp[k]));
                balls.push(Ball {
                    center: c,
                    radius: 0.5 * (bp[k] + hi),
                });
            }
        }
        offsets.push(balls.len());
        Self { balls, offsets }
    }

    pub fn balls(&self) -> &[Ball] {
        &self.balls
    }

    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    /// Balls centred at `c`, smallest first.
    pub fn around(&self, c: PointId) -> &[Ball] {
        &self.balls[self.offsets[c]..self.offsets[c + 1]]
    }

    pub fn range_of(&self, c: PointId) -> std::ops::Range<usize> {
        self.offsets[c]..self.offsets[c + 1]
    }

    /// Index of the canonical ball with the same centre and member set as `ball`.
    pub fn index_of(&self, space: &Space, ball: &Ball) -> usize {
        let bp = space.breakpoints(ball.center);
        let k = bp.partition_point(|&d| d < ball.radius) - 1;
        self.offsets[ball.center] + k
    }

    pub fn canonicalize(&self, space: &Space, ball: &Ball) -> Ball {
        self.balls[self.index_of(space, ball)]
    }

    /// Position of ball `index` within its centre's list; equals the breakpoint index.
    pub fn level_of(&self, index: usize) -> usize {
        index - self.offsets[self.balls[index].center]
    }

    pub fn members(&self, space: &Space, index: usize) -> PointSet {
        let b = self.balls[index];
        let count = space.closed_count_at(b.center, self.level_of(index));
        space.point_set(space.radial_order(b.center)[..count].iter().copied())
    }

    pub fn measure(&self, space: &Space, index: usize) -> f64 {
        let b = self.balls[index];
        space.prefix_mass(b.center, space.closed_count_at(b.center, self.level_of(index)))
    }

    /// CSV table with columns `center,radius,members,measure`.
    pub fn write_csv<W: Write>(&self, space: &Space, mut out: W) -> std::io::Result<()> {
        writeln!(out, "center,radius,members,measure")?;
        for (i, b) in self.balls.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{}",
                space.name(b.center),
                b.radius,
                space.format_set(&self.members(space, i)),
                self.measure(space, i)
            )?;
        }
        Ok(())
    }
}

/// Extra radii per gap between consecutive breakpoints, used to probe
/// sensitivity of results to the midpoint convention. The canonical midpoint
/// itself is never repeated.
pub fn refinement_radii(space: &Space, center: PointId, extra: usize) -> Vec<f64> {
    let bp = space.breakpoints(center);
    let mut radii = Vec::new();
    for k in 0..bp.len() {
        let lo = bp[k];
        let hi = bp.get(k + 1).copied().unwrap_or_else(|| outer_bound(lo));
        let mid = 0.5 * (lo + hi);
        for j in 1..=extra {
            let r = lo + (hi - lo) * j as f64 / (extra + 1) as f64;
            if r != mid && r > lo && r <= hi {
                radii.push(r);
            }
        }
    }
    radii
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s3() -> Space {
        Space::from_coords(
            Space::default_names(3),
            &[vec![0.0], vec![1.0], vec![3.0]],
            vec![1.0; 3],
        )
        .unwrap()
    }

    #[test]
    fn s3_radii_around_p0() {
        let s = s3();
        let fam = CanonicalBallFamily::new(&s);
        let radii: Vec<f64> = fam.around(0).iter().map(|b| b.radius).collect();
        assert_eq!(radii, vec![0.5, 2.0, 6.0]);
        let sets: Vec<Vec<usize>> = fam.range_of(0).map(|i| fam.members(&s, i).ones().collect()).collect();
        assert_eq!(sets, vec![vec![0], vec![0, 1], vec![0, 1, 2]]);
    }

    #[test]
    fn single_point_has_radius_two() {
        let s = Space::from_matrix(vec!["x".into()], vec![vec![0.0]], vec![1.0]).unwrap();
        let fam = CanonicalBallFamily::new(&s);
        assert_eq!(fam.balls(), &[Ball { center: 0, radius: 2.0 }]);
    }

    #[test]
    fn two_points() {
        let s = Space::from_matrix(
            Space::default_names(2),
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            vec![1.0, 1.0],
        )
        .unwrap();
        let fam = CanonicalBallFamily::new(&s);
        for c in 0..2 {
            let radii: Vec<f64> = fam.around(c).iter().map(|b| b.radius).collect();
            assert_eq!(radii, vec![0.5, 2.0]);
        }
    }

    #[test]
    fn canonicalize_snaps_to_representative() {
        let s = s3();
        let fam = CanonicalBallFamily::new(&s);
        assert_eq!(
            fam.canonicalize(&s, &Ball::new(0, 1.2).unwrap()),
            Ball::new(0, 2.0).unwrap()
        );
        assert_eq!(
            fam.canonicalize(&s, &Ball::new(0, 100.0).unwrap()),
            Ball::new(0, 6.0).unwrap()
        );
        assert_eq!(
            fam.canonicalize(&s, &Ball::new(0, 1.0).unwrap()),
            Ball::new(0, 0.5).unwrap()
        );
        for b in fam.balls() {
            assert_eq!(fam.canonicalize(&s, b), *b);
        }
    }

    #[test]
    fn members_agree_with_direct_query() {
        let s = s3();
        let fam = CanonicalBallFamily::new(&s);
        for (i, b) in fam.balls().iter().enumerate() {
            assert_eq!(fam.members(&s, i), s.ball_members(b).unwrap());
            assert_eq!(fam.measure(&s, i), s.ball_measure(b).unwrap());
        }
    }

    #[test]
    fn refinement_skips_midpoints() {
        let s = s3();
        let radii = refinement_radii(&s, 0, 1);
        assert!(radii.is_empty());
        let radii = refinement_radii(&s, 0, 2);
        assert_eq!(radii.len(), 6);
        let fam = CanonicalBallFamily::new(&s);
        for r in radii {
            assert!(!fam.around(0).iter().any(|b| b.radius == r));
        }
    }

    #[test]
    fn csv_export() {
        let s = s3();
        let fam = CanonicalBallFamily::new(&s);
        let mut buf = Vec::new();
        fam.write_csv(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("center,radius,members,measure"));
        assert_eq!(lines.next(), Some("p0,0.5,p0,1"));
        assert_eq!(lines.next(), Some("p0,2,p0;p1,2"));
    }
}
