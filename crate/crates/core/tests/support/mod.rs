//! Test spaces, seeded functions and brute-force reference computations.
//!
//! The references here are written directly from the definitions and share
//! no code with the library beyond the space type and `lambda` evaluation.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use updoubling::dominating::DominatingFunction;
use updoubling::{Generator, Space, SpaceFunction};

pub fn s3() -> Space {
    Space::from_coords(
        Space::default_names(3),
        &[vec![0.0], vec![1.0], vec![3.0]],
        vec![1.0; 3],
    )
    .unwrap()
}

pub fn build(spec: &str) -> Space {
    spec.parse::<Generator>().unwrap().build().unwrap()
}

/// The spaces every structural criterion runs on.
pub fn test_spaces() -> Vec<(String, Space)> {
    let mut out = vec![("s3".to_string(), s3())];
    for spec in [
        "uniform_grid(8,1)",
        "uniform_grid(16,1)",
        "uniform_grid(4,2)",
        "cantor_dust(3)",
        "cantor_dust(4)",
        "segment_plus_cluster(8,100)",
        "segment_plus_cluster(6,3)",
        "random_euclidean(10,1)",
        "random_euclidean(12,2)",
    ] {
        out.push((spec.to_string(), build(spec)));
    }
    out
}

pub fn random_function(n: usize, seed: u64) -> SpaceFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SpaceFunction::new((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

pub fn sawtooth(n: usize, period: usize) -> SpaceFunction {
    SpaceFunction::new((0..n).map(|i| (i % period) as f64).collect()).unwrap()
}

/// `(center, radius)` for every distinct open ball, radius at the midpoint
/// between consecutive distances and twice the largest distance at the end.
pub fn canonical_balls(space: &Space) -> Vec<(usize, f64)> {
    let n = space.len();
    let mut out = Vec::new();
    for c in 0..n {
        let mut d: Vec<f64> = (0..n).map(|y| space.dist(c, y)).collect();
        d.sort_by(f64::total_cmp);
        d.dedup();
        for k in 0..d.len() {
            let r = match d.get(k + 1) {
                Some(next) => 0.5 * (d[k] + next),
                None if d[k] > 0.0 => 2.0 * d[k],
                None => 2.0,
            };
            out.push((c, r));
        }
    }
    out
}

fn members(space: &Space, c: usize, r: f64) -> Vec<usize> {
    (0..space.len()).filter(|&y| space.dist(c, y) < r).collect()
}

fn mass(space: &Space, c: usize, r: f64) -> f64 {
    members(space, c, r).iter().map(|&y| space.weight(y)).sum()
}

/// `sup over open balls B containing x of (1 / mu(5B)) sum_B |f|`, taking
/// the right limit at each distance from each centre.
pub fn maximal_reference(space: &Space, f: &SpaceFunction) -> Vec<f64> {
    let n = space.len();
    let mut out = vec![0.0f64; n];
    for c in 0..n {
        for s in (0..n).map(|y| space.dist(c, y)) {
            // Closed ball of radius s around c and every x in it.
            let inside: Vec<usize> = (0..n).filter(|&z| space.dist(c, z) <= s).collect();
            let integral: f64 = inside.iter().map(|&z| space.weight(z) * f[z].abs()).sum();
            let big: f64 = (0..n)
                .filter(|&z| space.dist(c, z) <= 5.0 * s)
                .map(|z| space.weight(z))
                .sum();
            for &x in &inside {
                out[x] = out[x].max(integral / big);
            }
        }
    }
    out
}

/// Points `x` of `B(c, r)` with no doubling `alpha^j B(x, alpha^-k r)`, `j = 0..=k`.
pub fn bad_points_reference(space: &Space, c: usize, r: f64, alpha: f64, beta: f64, k: usize) -> Vec<usize> {
    members(space, c, r)
        .into_iter()
        .filter(|&x| {
            (0..=k).all(|j| {
                let radius = r * alpha.powi(j as i32 - k as i32);
                mass(space, x, alpha * radius) > beta * mass(space, x, radius)
            })
        })
        .collect()
}

struct OracleProblem {
    /// Per ball: `(values, weights)` of members, and `mu(rho B)`.
    balls: Vec<(Vec<(f64, f64)>, f64)>,
    /// `(inner, outer, K)`
    pairs: Vec<(usize, usize, f64)>,
}

fn phi(members: &[(f64, f64)], x: f64) -> f64 {
    members.iter().map(|&(v, w)| w * (v - x).abs()).sum()
}

fn oracle_problem(space: &Space, lambda: &DominatingFunction, f: &SpaceFunction, rho: f64) -> OracleProblem {
    let canon = canonical_balls(space);
    let sets: Vec<Vec<usize>> = canon.iter().map(|&(c, r)| members(space, c, r)).collect();
    let balls = canon
        .iter()
        .zip(&sets)
        .map(|(&(c, r), m)| {
            (
                m.iter().map(|&y| (f[y], space.weight(y))).collect(),
                mass(space, c, rho * r),
            )
        })
        .collect();
    let mut pairs = Vec::new();
    for (i, &(c, r)) in canon.iter().enumerate() {
        for (j, &(c1, r1)) in canon.iter().enumerate() {
            if i == j || r > r1 || !sets[i].iter().all(|y| sets[j].contains(y)) {
                continue;
            }
            let mut k = 1.0;
            for y in 0..space.len() {
                if space.dist(c1, y) < 2.0 * r1 && space.dist(c, y) >= r {
                    k += space.weight(y) / lambda.evaluate(space, c, space.dist(c, y)).unwrap();
                }
            }
            pairs.push((i, j, k));
        }
    }
    OracleProblem { balls, pairs }
}

/// Is there a choice of constants on the grid `lo + k step` admissible at level `a`?
fn grid_feasible(p: &OracleProblem, lo: f64, step: f64, points: i64, a: f64) -> bool {
    let value = |k: i64| lo + k as f64 * step;
    let mut low = Vec::with_capacity(p.balls.len());
    let mut high = Vec::with_capacity(p.balls.len());
    for (m, inflated) in &p.balls {
        let ok: Vec<i64> = (0..=points).filter(|&k| phi(m, value(k)) <= a * inflated).collect();
        match (ok.first(), ok.last()) {
            (Some(&l), Some(&h)) => {
                low.push(l);
                high.push(h);
            }
            _ => return false,
        }
    }
    // Upper-bound propagation over x_i - x_j <= floor(a K / step).
    let reach: Vec<i64> = p.pairs.iter().map(|&(_, _, k)| (a * k / step).floor() as i64).collect();
    loop {
        let mut changed = false;
        for (&(i, j, _), &d) in p.pairs.iter().zip(&reach) {
            for (u, v) in [(i, j), (j, i)] {
                if high[u] > high[v] + d {
                    high[u] = high[v] + d;
                    changed = true;
                }
            }
        }
        if high.iter().zip(&low).any(|(h, l)| h < l) {
            return false;
        }
        if !changed {
            break;
        }
    }
    let x: Vec<f64> = high.iter().map(|&k| value(k)).collect();
    p.balls
        .iter()
        .zip(&x)
        .all(|((m, inflated), &v)| phi(m, v) <= a * inflated)
        && p.pairs.iter().all(|&(i, j, k)| (x[i] - x[j]).abs() <= a * k)
}

/// Smallest `A` admitting constants on the `step` grid over `[min f, max f]`, by bisection.
pub fn rbmo_oracle(space: &Space, lambda: &DominatingFunction, f: &SpaceFunction, rho: f64, step: f64) -> f64 {
    let lo = f.values().iter().copied().fold(f64::INFINITY, f64::min);
    let hi = f.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return 0.0;
    }
    let points = ((hi - lo) / step).ceil() as i64;
    let p = oracle_problem(space, lambda, f, rho);
    let mut top = 1.0;
    while !grid_feasible(&p, lo, step, points, top) {
        top *= 2.0;
    }
    let mut bottom = 0.0;
    for _ in 0..45 {
        let mid = 0.5 * (bottom + top);
        if grid_feasible(&p, lo, step, points, mid) {
            top = mid;
        } else {
            bottom = mid;
        }
    }
    top
}
