use rand::Rng as _;
use rand_distr::StandardNormal;

use super::{check_dims, Point};
use crate::error::{invalid, Result};
use crate::rng;
use crate::scalar::Scalar;

/// Dense Gaussian projection `x ↦ Gx / √k`, `G ∈ ℝ^{k×d}` drawn from a seed.
#[derive(Debug, Clone)]
pub struct JlProjection {
    source_dim: usize,
    target_dim: usize,
    seed: u64,
    /// Row-major, already scaled by `1/√k`.
    matrix: Vec<f64>,
}

impl JlProjection {
    pub fn new(source_dim: usize, target_dim: usize, seed: u64) -> Result<Self> {
        if target_dim == 0 {
            return Err(invalid("JL target dimension must be positive"));
        }
        if target_dim > source_dim {
            return Err(invalid(format!(
                "JL target dimension {target_dim} exceeds source dimension {source_dim}"
            )));
        }
        let scale = 1.0 / (target_dim as f64).sqrt();
        let mut g = rng::rng(seed);
        let matrix = (0..source_dim * target_dim)
            .map(|_| g.sample::<f64, _>(StandardNormal) * scale)
            .collect();
        Ok(JlProjection { source_dim, target_dim, seed, matrix })
    }

    pub fn source_dim(&self) -> usize {
        self.source_dim
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn apply<T: Scalar>(&self, x: &[T]) -> Result<Vec<T>> {
        check_dims(self.source_dim, x.len())?;
        Ok(self
            .matrix
            .chunks_exact(self.source_dim)
            .map(|row| {
                let mut acc = 0.0;
                for (&a, &b) in row.iter().zip(x) {
                    acc += a * b.as_f64();
                }
                T::of(acc)
            })
            .collect())
    }

    pub fn apply_point<T: Scalar>(&self, p: &Point<T>) -> Result<Point<T>> {
        Ok(Point { id: p.id, coords: self.apply(&p.coords)? })
    }
}

/// Projects every point to `target_d` dimensions; ids are preserved.
pub fn jl_reduce<T: Scalar>(points: &[Point<T>], target_d: usize, seed: u64) -> Result<Vec<Point<T>>> {
    let Some(first) = points.first() else {
        if target_d == 0 {
            return Err(invalid("JL target dimension must be positive"));
        }
        return Ok(Vec::new());
    };
    let proj = JlProjection::new(first.dim(), target_d, seed)?;
    points.iter().map(|p| proj.apply_point(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::dist;

    fn random_points(n: usize, d: usize, seed: u64) -> Vec<Point<f64>> {
        let mut g = rng::rng(seed);
        (0..n)
            .map(|i| Point::new(i as u32, (0..d).map(|_| g.sample(StandardNormal)).collect()).unwrap())
            .collect()
    }

    #[test]
    fn deterministic_and_id_preserving() {
        let pts = random_points(20, 64, 1);
        let a = jl_reduce(&pts, 16, 7).unwrap();
        let b = jl_reduce(&pts, 16, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().zip(&pts).all(|(x, y)| x.id == y.id && x.dim() == 16));
        let c = jl_reduce(&pts, 16, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_maps_to_zero() {
        let z = vec![Point::new(0, vec![0.0f64; 32]).unwrap()];
        assert!(jl_reduce(&z, 8, 3).unwrap()[0].coords.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_targets() {
        let pts = random_points(2, 8, 1);
        assert!(jl_reduce(&pts, 0, 1).is_err());
        assert!(jl_reduce(&pts, 9, 1).is_err());
    }

    #[test]
    fn preserves_pairwise_distances() {
        let pts = random_points(500, 2048, 42);
        let low = jl_reduce(&pts, 256, 9).unwrap();
        let (mut good, mut total) = (0usize, 0usize);
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                let a = dist(&pts[i].coords, &pts[j].coords);
                let b = dist(&low[i].coords, &low[j].coords);
                let ratio = b / a;
                total += 1;
                if (1.0 / 1.3..=1.3).contains(&ratio) {
                    good += 1;
                }
            }
        }
        assert!(good as f64 / total as f64 >= 0.99, "{good}/{total}");
    }
}
