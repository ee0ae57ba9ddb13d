//! Spherical LSH: carve caps `{u : ⟨u, g⟩ ≥ d^{1/4}}` for Gaussian `g` off
//! the unit sphere, one after another, with a final overflow part.

mod collision;

pub use collision::{
    estimate_conditional_collision, estimate_conditional_collision_with, estimate_pair_collision,
    estimate_pair_collision_with, pair_collision_probability, predicted_log_inv_collision,
    CollisionEstimate,
};

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{check_dims, dot, gaussian_tail_bounds, norm};
use crate::rng;
use crate::scalar::Scalar;

/// Directions are drawn in blocks of this many, each block from its own
/// derived stream, so any prefix can be generated without the rest.
pub const BLOCK: usize = 64;

/// Tolerance on `‖u‖ = 1` accepted by [`SphericalPartitionSpec::locate`].
pub fn unit_tolerance<T: Scalar>() -> f64 {
    (64.0 * T::epsilon().as_f64()).max(1e-6)
}

/// A sampled partition: `num_caps` Gaussian directions and an overflow part.
///
/// Directions are a pure function of `(dim, seed)`. They are regenerated
/// block by block whenever a lookup needs them, so a spec costs a few words
/// of memory however many caps it has.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphericalPartitionSpec<T> {
    dim: usize,
    threshold: T,
    num_caps: usize,
    seed: u64,
}

impl<T: Scalar> SphericalPartitionSpec<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `d^{1/4}`.
    pub fn threshold(&self) -> T {
        self.threshold
    }

    pub fn num_caps(&self) -> usize {
        self.num_caps
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Part index of points no cap captured.
    pub fn overflow_index(&self) -> usize {
        self.num_caps
    }

    /// Number of parts including the overflow part.
    pub fn num_parts(&self) -> usize {
        self.num_caps + 1
    }

    fn num_blocks(&self) -> usize {
        self.num_caps.div_ceil(BLOCK)
    }

    /// Directions `b·BLOCK ..` (at most `BLOCK` of them), row-major.
    pub fn block(&self, b: usize) -> Vec<T> {
        let len = BLOCK.min(self.num_caps - b * BLOCK) * self.dim;
        let mut g = rng::rng(rng::derive(self.seed, b as u64));
        (0..len).map(|_| T::of(g.sample::<f64, _>(StandardNormal))).collect()
    }

    /// The `i`-th Gaussian direction, unnormalized.
    pub fn direction(&self, i: usize) -> Vec<T> {
        assert!(i < self.num_caps, "direction {i} out of range");
        let off = (i % BLOCK) * self.dim;
        self.block(i / BLOCK)[off..off + self.dim].to_vec()
    }

    /// Index of the first cap containing `u`, or the overflow index.
    pub fn locate(&self, u: &[T]) -> Result<usize> {
        check_dims(self.dim, u.len())?;
        let n = norm(u).as_f64();
        if (n - 1.0).abs() > unit_tolerance::<T>() {
            return Err(Error::NotUnit(n));
        }
        Ok(self.locate_unchecked(u))
    }

    /// [`Self::locate`] without the dimension and norm checks.
    pub fn locate_unchecked(&self, u: &[T]) -> usize {
        for b in 0..self.num_blocks() {
            let block = self.block(b);
            for (k, g) in block.chunks_exact(self.dim).enumerate() {
                if dot(u, g) >= self.threshold {
                    return b * BLOCK + k;
                }
            }
        }
        self.num_caps
    }

    /// Locates many points at once, walking directions block by block.
    /// Agrees exactly with [`Self::locate_unchecked`].
    pub fn locate_batch(&self, us: &[&[T]]) -> Vec<usize> {
        let mut out = vec![self.num_caps; us.len()];
        let mut pending: Vec<usize> = (0..us.len()).collect();
        for b in 0..self.num_blocks() {
            if pending.is_empty() {
                break;
            }
            let block = self.block(b);
            pending.retain(|&i| {
                for (k, g) in block.chunks_exact(self.dim).enumerate() {
                    if dot(us[i], g) >= self.threshold {
                        out[i] = b * BLOCK + k;
                        return false;
                    }
                }
                true
            });
        }
        out
    }
}

/// Samples a partition of `S^{d-1}` with `t` caps.
pub fn sample_partition<T: Scalar>(d: usize, t: usize, seed: u64) -> Result<SphericalPartitionSpec<T>> {
    if d < 2 {
        return Err(invalid(format!("spherical partitions need d >= 2, got {d}")));
    }
    if t == 0 {
        return Err(invalid("a spherical partition needs at least one cap"));
    }
    Ok(SphericalPartitionSpec { dim: d, threshold: T::of((d as f64).powf(0.25)), num_caps: t, seed })
}

/// Smallest `T` with `(1 − L)^T ≤ miss_bound`, where `L` is the lower
/// Gaussian tail bound at `d^{1/4}`: a fixed point escapes all `T` caps with
/// probability at most `miss_bound`.
pub fn default_t(d: usize, miss_bound: f64) -> Result<usize> {
    if !(miss_bound > 0.0 && miss_bound < 1.0) {
        return Err(invalid(format!("miss bound must lie in (0, 1), got {miss_bound}")));
    }
    if d < 2 {
        return Err(invalid(format!("spherical partitions need d >= 2, got {d}")));
    }
    let lower = gaussian_tail_bounds((d as f64).powf(0.25))?.lower;
    let per_cap = (-lower).ln_1p();
    let mut t = (miss_bound.ln() / per_cap).ceil().max(1.0) as usize;
    while t > 1 && per_cap * (t - 1) as f64 <= miss_bound.ln() {
        t -= 1;
    }
    while per_cap * t as f64 > miss_bound.ln() {
        t += 1;
    }
    Ok(t)
}
