use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Space;
use crate::error::{Error, Result};

/// Named families of test spaces. All are deterministic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Generator {
    /// `n^dim` lattice points with unit spacing and unit weights.
    UniformGrid { n: usize, dim: usize },
    /// Left endpoints of the level-`level` triadic Cantor intervals, each of weight `2^-level`.
    CantorDust { level: u32 },
    /// `n` unit points at `0..n` plus one point of weight 1000 at distance `gap` past the last.
    SegmentPlusCluster { n: usize, gap: f64 },
    /// `n` points uniform in the unit square with weights in `[0.5, 1.5)`.
    RandomEuclidean { n: usize, seed: u64 },
}

/// Weight of the isolated point in [`Generator::SegmentPlusCluster`].
pub const CLUSTER_WEIGHT: f64 = 1000.0;

impl Generator {
    pub fn build(&self) -> Result<Space> {
        match *self {
            Generator::UniformGrid { n, dim } => {
                if n == 0 || dim == 0 {
                    return Err(Error::InvalidParameter("uniform_grid needs n, dim >= 1".into()));
                }
                let total = n
                    .checked_pow(dim as u32)
                    .filter(|&t| t <= 100_000)
                    .ok_or_else(|| Error::InvalidParameter("uniform_grid too large".into()))?;
                let coords: Vec<Vec<f64>> = (0..total)
                    .map(|mut i| {
                        let mut c = Vec::with_capacity(dim);
                        for _ in 0..dim {
                            c.push((i % n) as f64);
                            i /= n;
                        }
                        c.reverse();
                        c
                    })
                    .collect();
                Space::from_coords(Space::default_names(total), &coords, vec![1.0; total])
            }
            Generator::CantorDust { level } => {
                if level > 12 {
                    return Err(Error::InvalidParameter("cantor_dust level above 12".into()));
                }
                // Numerators over 3^level of left endpoints: digits 0 or 2 in base 3.
                let mut nums = vec![0u64];
                for _ in 0..level {
                    nums = nums.iter().flat_map(|&a| [3 * a, 3 * a + 2]).collect();
                }
                let den = 3f64.powi(level as i32);
                let coords: Vec<Vec<f64>> = nums.iter().map(|&a| vec![a as f64 / den]).collect();
                let w = 0.5f64.powi(level as i32);
                Space::from_coords(Space::default_names(coords.len()), &coords, vec![w; coords.len()])
            }
            Generator::SegmentPlusCluster { n, gap } => {
                if n == 0 || !(gap.is_finite() && gap > 0.0) {
                    return Err(Error::InvalidParameter(
                        "segment_plus_cluster needs n >= 1 and gap > 0".into(),
                    ));
                }
                let mut coords: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
                coords.push(vec![(n - 1) as f64 + gap]);
                let mut weights = vec![1.0; n];
                weights.push(CLUSTER_WEIGHT);
                Space::from_coords(Space::default_names(n + 1), &coords, weights)
            }
            Generator::RandomEuclidean { n, seed } => {
                if n == 0 {
                    return Err(Error::InvalidParameter("random_euclidean needs n >= 1".into()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let coords: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()]).collect();
                let weights = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
                Space::from_coords(Space::default_names(n), &coords, weights)
            }
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Generator::UniformGrid { n, dim } => write!(f, "uniform_grid({n},{dim})"),
            Generator::CantorDust { level } => write!(f, "cantor_dust({level})"),
            Generator::SegmentPlusCluster { n, gap } => write!(f, "segment_plus_cluster({n},{gap})"),
            Generator::RandomEuclidean { n, seed } => write!(f, "random_euclidean({n},{seed})"),
        }
    }
}

/// Parses `name(a,b)` or `name:a:b`.
impl FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args): (&str, Vec<&str>) = if let Some(open) = s.find('(') {
            let inner = s[open + 1..]
                .strip_suffix(')')
                .ok_or_else(|| Error::InvalidParameter(format!("unbalanced parentheses in `{s}`")))?;
            (
                &s[..open],
                inner.split(',').map(str::trim).filter(|a| !a.is_empty()).collect(),
            )
        } else {
            let mut parts = s.split(':');
            (parts.next().unwrap_or(""), parts.collect())
        };
        let bad = |what: &str| Error::InvalidParameter(format!("{name}: {what}"));
        let int = |i: usize| -> Result<usize> {
            args.get(i)
                .ok_or_else(|| bad("missing argument"))?
                .parse()
                .map_err(|_| bad("expected an integer"))
        };
        let arity = |k: usize| {
            if args.len() == k {
                Ok(())
            } else {
                Err(bad(&format!("expected {k} arguments, got {}", args.len())))
            }
        };
        match name.trim() {
            "uniform_grid" => {
                arity(2)?;
                Ok(Generator::UniformGrid {
                    n: int(0)?,
                    dim: int(1)?,
                })
            }
            "cantor_dust" => {
                arity(1)?;
                Ok(Generator::CantorDust { level: int(0)? as u32 })
            }
            "segment_plus_cluster" => {
                arity(2)?;
                let gap = args[1].parse().map_err(|_| bad("expected a number"))?;
                Ok(Generator::SegmentPlusCluster { n: int(0)?, gap })
            }
            "random_euclidean" => {
                arity(2)?;
                Ok(Generator::RandomEuclidean {
                    n: int(0)?,
                    seed: int(1)? as u64,
                })
            }
            other => Err(Error::UnknownGenerator(other.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_1d() {
        let s = Generator::UniformGrid { n: 4, dim: 1 }.build().unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s.dist(0, 3), 3.0);
        assert_eq!(s.weights(), &[1.0; 4]);
    }

    #[test]
    fn grid_2d() {
        let s = Generator::UniformGrid { n: 3, dim: 2 }.build().unwrap();
        assert_eq!(s.len(), 9);
        assert_eq!(s.dist(0, 8), 8f64.sqrt());
    }

    #[test]
    fn cantor_level_two() {
        let s = Generator::CantorDust { level: 2 }.build().unwrap();
        assert_eq!(s.len(), 4);
        let pos: Vec<f64> = (0..4).map(|i| s.dist(0, i)).collect();
        assert_eq!(pos, vec![0.0, 2.0 / 9.0, 6.0 / 9.0, 8.0 / 9.0]);
        assert_eq!(s.weights(), &[0.25; 4]);
    }

    #[test]
    fn segment_plus_cluster_layout() {
        let s = Generator::SegmentPlusCluster { n: 8, gap: 100.0 }.build().unwrap();
        assert_eq!(s.len(), 9);
        assert_eq!(s.dist(7, 8), 100.0);
        assert_eq!(s.weight(8), CLUSTER_WEIGHT);
    }

    #[test]
    fn random_is_seeded() {
        let a = Generator::RandomEuclidean { n: 6, seed: 3 }.build().unwrap();
        let b = Generator::RandomEuclidean { n: 6, seed: 3 }.build().unwrap();
        let c = Generator::RandomEuclidean { n: 6, seed: 4 }.build().unwrap();
        assert_eq!(a.dist_rows(), b.dist_rows());
        assert_eq!(a.weights(), b.weights());
        assert_ne!(a.dist_rows(), c.dist_rows());
        assert!(a.weights().iter().all(|w| (0.5..1.5).contains(w)));
    }

    #[test]
    fn parsing() {
        assert_eq!(
            "uniform_grid(16,1)".parse::<Generator>().unwrap(),
            Generator::UniformGrid { n: 16, dim: 1 }
        );
        assert_eq!(
            "segment_plus_cluster:8:100".parse::<Generator>().unwrap(),
            Generator::SegmentPlusCluster { n: 8, gap: 100.0 }
        );
        assert_eq!(
            "cantor_dust(3)".parse::<Generator>().unwrap(),
            Generator::CantorDust { level: 3 }
        );
        assert!(matches!(
            "sphere(3)".parse::<Generator>(),
            Err(Error::UnknownGenerator(_))
        ));
        assert!("uniform_grid(3)".parse::<Generator>().is_err());
        for g in [
            Generator::UniformGrid { n: 2, dim: 3 },
            Generator::RandomEuclidean { n: 5, seed: 9 },
            Generator::SegmentPlusCluster { n: 3, gap: 2.5 },
        ] {
            assert_eq!(g.to_string().parse::<Generator>().unwrap(), g);
        }
    }
}
