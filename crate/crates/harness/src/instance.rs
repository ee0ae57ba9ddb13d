//! Random instances and the brute-force ground truth.

use anyhow::{ensure, Result};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use sann_core::geometry::{dist, PointId};
use sann_core::rng::{self, rng};
use sann_core::Point;

/// `n` uniform points on the sphere of radius `c·r/√2` around the origin and
/// queries planted within `r` of a random data point.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomInstance {
    pub points: Vec<Point>,
    /// `(query, planted id)`.
    pub queries: Vec<(Vec<f64>, PointId)>,
    pub c: f64,
    pub r: f64,
    pub seed: u64,
}

impl RandomInstance {
    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, |p| p.dim())
    }

    pub fn sphere_radius(&self) -> f64 {
        self.c * self.r / std::f64::consts::SQRT_2
    }
}

fn unit_gaussian(d: usize, g: &mut sann_core::rng::Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(g)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.0 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Queries are uniform in the ball `B(p, r)` around the planted point `p`,
/// so they generally leave the sphere.
pub fn gen_random_instance(n: usize, d: usize, c: f64, r: f64, n_queries: usize, seed: u64) -> Result<RandomInstance> {
    ensure!(n >= 2, "need at least two points");
    ensure!(d >= 16, "need dimension at least 16");
    ensure!(c > 1.0 && r > 0.0, "need c > 1 and r > 0");
    let radius = c * r / std::f64::consts::SQRT_2;
    let mut g = rng(rng::derive(seed, 0));
    let points = (0..n)
        .map(|k| Point { id: k as PointId, coords: unit_gaussian(d, &mut g).into_iter().map(|x| x * radius).collect() })
        .collect::<Vec<_>>();
    let mut g = rng(rng::derive(seed, 1));
    let queries = (0..n_queries)
        .map(|_| {
            let planted = g.random_range(0..n);
            let len = r * g.random::<f64>().powf(1.0 / d as f64);
            let dir = unit_gaussian(d, &mut g);
            let q = points[planted].coords.iter().zip(&dir).map(|(p, u)| p + len * u).collect();
            (q, planted as PointId)
        })
        .collect();
    Ok(RandomInstance { points, queries, c, r, seed })
}

/// The closest point within `threshold` of `q`, ties broken by smaller id.
pub fn brute_force_near<'a>(points: &'a [Point], q: &[f64], threshold: f64) -> Option<&'a Point> {
    let mut best: Option<(f64, &Point)> = None;
    for p in points {
        let d = dist(&p.coords, q);
        if d > threshold {
            continue;
        }
        best = match best {
            Some((bd, bp)) if bd < d || (bd == d && bp.id < p.id) => Some((bd, bp)),
            _ => Some((d, p)),
        };
    }
    best.map(|(_, p)| p)
}

/// Fraction of (query, non-planted point) pairs closer than `limit`.
pub fn non_planted_close_fraction(inst: &RandomInstance, limit: f64) -> f64 {
    let mut close = 0u64;
    let mut total = 0u64;
    for (q, planted) in &inst.queries {
        for p in inst.points.iter().filter(|p| p.id != *planted) {
            total += 1;
            close += u64::from(dist(&p.coords, q) < limit);
        }
    }
    if total == 0 {
        0.0
    } else {
        close as f64 / total as f64
    }
}
