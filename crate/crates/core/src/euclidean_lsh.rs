//! Data-independent partition of `ℝ^d` by concatenated quantized Gaussian
//! projections, calibrated so that `ln(1/p) ≈ τ√d` for small distances `τ`.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{check_dims, dot, Point};
use crate::parallel;
use crate::rng::{self, Fingerprint};
use crate::scalar::Scalar;
use crate::spherical_lsh::CollisionEstimate;

/// `k` hashes `⌊(⟨aⱼ, x⟩ + bⱼ) / w⌋`, all drawn from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPartitionSpec<T> {
    pub dim: usize,
    pub k: usize,
    pub width: T,
    pub seed: u64,
    /// Row-major `k × dim`.
    projections: Vec<T>,
    offsets: Vec<T>,
}

/// Bucket width for a `d`-dimensional grid partition with `k = d` hashes.
pub fn calibrated_width(d: usize) -> f64 {
    (2.0 / std::f64::consts::PI).sqrt() * (d as f64).sqrt()
}

pub fn sample_grid_partition<T: Scalar>(d: usize, seed: u64) -> Result<GridPartitionSpec<T>> {
    if d < 2 {
        return Err(invalid(format!("grid partitions need d >= 2, got {d}")));
    }
    let k = d;
    let width = calibrated_width(d);
    let mut g = rng::rng(seed);
    let projections = (0..k * d).map(|_| T::of(g.sample(StandardNormal))).collect();
    let offsets = (0..k).map(|_| T::of(g.random_range(0.0..width))).collect();
    Ok(GridPartitionSpec { dim: d, k, width: T::of(width), seed, projections, offsets })
}

impl<T: Scalar> GridPartitionSpec<T> {
    pub fn projection(&self, j: usize) -> &[T] {
        &self.projections[j * self.dim..(j + 1) * self.dim]
    }

    pub fn offsets(&self) -> &[T] {
        &self.offsets
    }

    fn component(&self, j: usize, x: &[T], scale: T) -> i64 {
        let v = (dot(self.projection(j), x) * scale + self.offsets[j]) / self.width;
        v.floor().to_i64().unwrap_or(if v > T::zero() { i64::MAX } else { i64::MIN })
    }

    /// Key of `scale · x`; callers rescale to move the calibrated distance
    /// range onto their own.
    pub fn key_scaled(&self, x: &[T], scale: T) -> Vec<i64> {
        (0..self.k).map(|j| self.component(j, x, scale)).collect()
    }

    /// 64-bit digest of [`Self::key_scaled`], for hash tables.
    pub fn key_digest(&self, x: &[T], scale: T) -> u64 {
        let mut f = Fingerprint::default();
        for j in 0..self.k {
            f.push(self.component(j, x, scale) as u64);
        }
        f.finish()
    }
}

pub fn locate_grid<T: Scalar>(spec: &GridPartitionSpec<T>, p: &Point<T>) -> Result<Vec<i64>> {
    check_dims(spec.dim, p.dim())?;
    Ok(spec.key_scaled(&p.coords, T::one()))
}

/// Collision frequency of a pair at distance `tau` over fresh partitions,
/// using [`parallel::declared_workers`] workers.
pub fn estimate_grid_collision(tau: f64, d: usize, trials: u64, seed: u64) -> Result<CollisionEstimate> {
    estimate_grid_collision_with(tau, d, trials, seed, parallel::declared_workers())
}

/// Each hash sees the pair through `⟨a, v − u⟩ ~ N(0, τ²)` and a uniform
/// phase, so a trial draws `k` (normal, phase) pairs. The same seed gives the
/// same draws for every `tau`, and for fixed draws collision is monotone in
/// `tau`.
pub fn estimate_grid_collision_with(
    tau: f64,
    d: usize,
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<CollisionEstimate> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(invalid(format!("tau must be finite and non-negative, got {tau}")));
    }
    if d < 2 || trials == 0 {
        return Err(invalid("need d >= 2 and at least one trial"));
    }
    let w = calibrated_width(d);
    let (hits, n) = parallel::split_trials(trials, seed, workers, |n, g| {
        let mut hits = 0;
        for _ in 0..n {
            let mut same = true;
            for _ in 0..d {
                let z: f64 = g.sample(StandardNormal);
                let b: f64 = g.random_range(0.0..w);
                let shifted = b + tau * z;
                same &= (0.0..w).contains(&shifted);
            }
            hits += u64::from(same);
        }
        (hits, n)
    });
    Ok(CollisionEstimate::from_counts(hits, n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn determinism_and_shape() {
        let a = sample_grid_partition::<f64>(100, 4).unwrap();
        let b = sample_grid_partition::<f64>(100, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.k, 100);
        assert!((a.width - 7.979).abs() < 1e-3);
        assert_eq!(a.projections.len(), 100 * 100);
        assert_eq!(a.offsets().len(), 100);
        assert!(a.offsets().iter().all(|&o| (0.0..a.width).contains(&o)));
    }

    #[test]
    fn keys() {
        let s = sample_grid_partition::<f64>(8, 1).unwrap();
        let p = Point::new(0, vec![0.3; 8]).unwrap();
        let k = locate_grid(&s, &p).unwrap();
        assert_eq!(k.len(), 8);
        assert_eq!(k, locate_grid(&s, &p).unwrap());
        let bad = Point::new(0, vec![0.3; 7]).unwrap();
        assert!(locate_grid(&s, &bad).is_err());
        assert_eq!(s.key_digest(&p.coords, 1.0), s.key_digest(&p.coords, 1.0));
    }

    #[test]
    fn translation_along_projection() {
        let s = sample_grid_partition::<f64>(10, 2).unwrap();
        let p = Point::new(0, vec![0.1; 10]).unwrap();
        let key = locate_grid(&s, &p).unwrap();
        for j in 0..10 {
            let a = s.projection(j);
            let aa = dot(a, a);
            for shift in [1.0, 3.0, -2.0] {
                let moved: Vec<f64> = p.coords.iter().zip(a).map(|(x, y)| x + shift * s.width * y / aa).collect();
                let expected = (dot(a, &moved) + s.offsets()[j]) / s.width;
                let k2 = locate_grid(&s, &Point::new(0, moved).unwrap()).unwrap();
                assert_eq!(k2[j], expected.floor() as i64);
                let frac = ((dot(a, &p.coords) + s.offsets()[j]) / s.width).fract().abs();
                if frac > 1e-6 && frac < 1.0 - 1e-6 {
                    assert_eq!(k2[j] - key[j], shift as i64);
                }
            }
        }
    }

    #[test]
    fn estimator_edges() {
        assert_eq!(estimate_grid_collision_with(0.0, 100, 500, 1, 1).unwrap().p_hat, 1.0);
        let a = estimate_grid_collision_with(0.3, 50, 1000, 2, 2).unwrap();
        assert_eq!(a, estimate_grid_collision_with(0.3, 50, 1000, 2, 2).unwrap());
        assert!(estimate_grid_collision_with(50.0, 100, 200, 1, 1).unwrap().p_hat >= 0.0);
    }

    #[test]
    fn estimator_matches_real_partitions() {
        let (d, tau, trials) = (20, 0.3, 4000u64);
        let mut hits = 0;
        let u = Point::new(0, vec![0.0; d]).unwrap();
        let mut v = vec![0.0; d];
        v[0] = tau;
        let v = Point::new(1, v).unwrap();
        for t in 0..trials {
            let s = sample_grid_partition::<f64>(d, 1000 + t).unwrap();
            hits += u64::from(locate_grid(&s, &u).unwrap() == locate_grid(&s, &v).unwrap());
        }
        let real = CollisionEstimate::from_counts(hits, trials);
        let sim = estimate_grid_collision_with(tau, d, 20_000, 3, 1).unwrap();
        let se = (real.std_err.powi(2) + sim.std_err.powi(2)).sqrt();
        assert!((real.p_hat - sim.p_hat).abs() <= 4.0 * se, "{} vs {}", real.p_hat, sim.p_hat);
    }

    #[test]
    fn calibration_and_monotonicity() {
        let mut prev = 1.0;
        for tau in [0.05, 0.1, 0.2, 0.4] {
            let e = estimate_grid_collision_with(tau, 100, 20_000, 7, 1).unwrap();
            let ratio = e.log_inv() / (tau * 10.0);
            if tau <= 0.2 {
                assert!((0.7..=1.4).contains(&ratio), "tau {tau}: {ratio}");
            }
            assert!(e.p_hat <= prev);
            assert!(e.p_hat > 0.0);
            prev = e.p_hat;
        }
    }
}
