//! Vector math and the sphere/ball geometry the index is built from.

mod gaussian;
mod jl;
mod seb;

pub use gaussian::{gaussian_tail_bounds, TailBounds};
pub use jl::{jl_reduce, JlProjection};
pub use seb::{smallest_enclosing_ball, smallest_enclosing_ball_of, DEFAULT_SEB_TOL};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

pub type PointId = u32;

/// Relative tolerance for "lies on the sphere" checks.
pub const SPHERE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point<T> {
    pub id: PointId,
    pub coords: Vec<T>,
}

impl<T: Scalar> Point<T> {
    pub fn new(id: PointId, coords: Vec<T>) -> Result<Self> {
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(invalid(format!("point {id} has non-finite coordinate {bad}")));
        }
        Ok(Point { id, coords })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

/// Sphere `∂B(center, radius)` a sub-dataset lives on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereFrame<T> {
    pub center: Vec<T>,
    pub radius: T,
}

impl<T: Scalar> SphereFrame<T> {
    pub fn new(center: Vec<T>, radius: T) -> Result<Self> {
        if !(radius > T::zero()) || !radius.is_finite() {
            return Err(invalid(format!("sphere radius must be positive, got {radius}")));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(invalid("sphere center must be finite"));
        }
        Ok(SphereFrame { center, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Errors unless `x` is within [`SPHERE_TOL`] (relative) of the sphere,
    /// plus the rounding error of computing `x − center` in `T`.
    pub fn check_on_sphere(&self, x: &[T]) -> Result<()> {
        check_dims(self.center.len(), x.len())?;
        let norm = dist(x, &self.center);
        let magnitude = x.iter().chain(&self.center).fold(0.0f64, |m, v| m.max(v.as_f64().abs()));
        let rounding = 16.0 * T::epsilon().as_f64() * (x.len() as f64).sqrt() * magnitude;
        let err = (norm - self.radius).abs().as_f64();
        if err > SPHERE_TOL * self.radius.as_f64() + rounding {
            return Err(Error::OffSphere { norm: norm.as_f64(), radius: self.radius.as_f64() });
        }
        Ok(())
    }

    /// `(x - center) / radius`, the point mapped onto the unit sphere frame.
    pub fn to_unit(&self, x: &[T]) -> Vec<T> {
        let inv = T::one() / self.radius;
        x.iter().zip(&self.center).map(|(&a, &o)| (a - o) * inv).collect()
    }
}

/// Closed ball `B(center, radius)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball<T> {
    pub center: Vec<T>,
    pub radius: T,
}

impl<T: Scalar> Ball<T> {
    pub fn contains(&self, x: &[T], rel_slack: T) -> bool {
        dist(x, &self.center) <= self.radius * (T::one() + rel_slack)
    }
}

#[inline]
pub(crate) fn check_dims(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}

/// Sequential dot product. All code that must agree bit-for-bit (partition
/// location during build and during queries) goes through this function.
#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

#[inline]
pub fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

#[inline]
pub fn dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    sq_dist(a, b).sqrt()
}

#[inline]
pub fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Euclidean distance between two points of equal dimension.
pub fn distance<T: Scalar>(p: &Point<T>, q: &Point<T>) -> Result<T> {
    check_dims(p.dim(), q.dim())?;
    Ok(dist(&p.coords, &q.coords))
}

/// Distance on the `r1`-sphere between `p1` and the radial projection of a
/// point `p2` on a concentric `r2`-sphere, where `‖p1 - p2‖ = chord`.
pub fn project_between_spheres<T: Scalar>(r1: T, r2: T, chord: T) -> Result<T> {
    if !(r1 > T::zero()) || !(r2 > T::zero()) {
        return Err(invalid(format!("sphere radii must be positive, got {r1} and {r2}")));
    }
    let gap = (r1 - r2).abs();
    if chord < gap || chord.is_nan() {
        return Err(Error::InfeasibleChord { r: chord.as_f64(), gap: gap.as_f64() });
    }
    let inner = (chord * chord - gap * gap).max(T::zero());
    Ok((r1 * inner / r2).sqrt())
}

/// Index `k ≥ 1` of the annulus a point at distance `dist` from the center is
/// rounded up to: `k = ⌈dist / δ⌉`, with the center itself assigned to `k = 1`.
#[inline]
pub fn annulus_index<T: Scalar>(dist: T, delta: T) -> usize {
    let k = (dist / delta).ceil();
    let k = k.to_usize().unwrap_or(usize::MAX);
    k.max(1)
}

/// Moves `x` along the ray from `o` so that its distance to `o` becomes
/// `target`. The center itself goes along the first coordinate axis.
pub(crate) fn place_on_ray<T: Scalar>(x: &[T], o: &[T], target: T) -> Vec<T> {
    let r = dist(x, o);
    if r > T::zero() {
        let s = target / r;
        x.iter().zip(o).map(|(&a, &c)| c + (a - c) * s).collect()
    } else {
        let mut out = o.to_vec();
        if let Some(first) = out.first_mut() {
            *first += target;
        }
        out
    }
}

/// Rounds the distance from `o` up to the next multiple of `delta`, keeping
/// the direction: `o + δ⌈‖p-o‖/δ⌉ · (p-o)/‖p-o‖`.
pub fn round_to_annulus<T: Scalar>(p: &Point<T>, o: &[T], delta: T) -> Result<Point<T>> {
    check_dims(o.len(), p.dim())?;
    if !(delta > T::zero()) {
        return Err(invalid(format!("annulus width must be positive, got {delta}")));
    }
    let k = annulus_index(dist(&p.coords, o), delta);
    let coords = place_on_ray(&p.coords, o, delta * T::of_usize(k));
    Ok(Point { id: p.id, coords })
}

/// Encloses the cap `{u ∈ ∂B(o,R) : ‖u - x‖ ≤ cap_radius}` in a ball.
///
/// With `η = (2 - (cap_radius/R)²)/2` the cap is the set of sphere points
/// whose normalized component along `x̂` is at least `η`; for `η ≥ 0` the ball
/// centered at `o + ηR·x̂` with radius `R√(1-η²)` contains it. Caps larger
/// than a hemisphere (`η < 0`) get the whole ball `B(o, R)`.
pub fn cap_to_enclosing_ball<T: Scalar>(
    frame: &SphereFrame<T>,
    cap_center: &Point<T>,
    cap_radius: T,
) -> Result<Ball<T>> {
    frame.check_on_sphere(&cap_center.coords)?;
    let r = frame.radius;
    if !(cap_radius > T::zero()) || cap_radius >= r + r {
        return Err(invalid(format!("cap radius must lie in (0, 2R), got {cap_radius}")));
    }
    let rho = cap_radius / r;
    let two = T::of(2.0);
    let eta = ((two - rho * rho) / two).max(-T::one()).min(T::one());
    if eta < T::zero() {
        return Ok(Ball { center: frame.center.clone(), radius: r });
    }
    let axis = frame.to_unit(&cap_center.coords);
    let axis_norm = norm(&axis);
    let center = frame
        .center
        .iter()
        .zip(&axis)
        .map(|(&o, &a)| o + eta * r * a / axis_norm)
        .collect();
    let radius = r * (T::one() - eta * eta).max(T::zero()).sqrt();
    Ok(Ball { center, radius })
}

/// Embeds a bit vector as a 0/1 point; squared Euclidean distance between
/// embeddings equals Hamming distance.
pub fn hamming_embed<T: Scalar>(id: PointId, bits: &[bool]) -> Point<T> {
    let coords = bits.iter().map(|&b| if b { T::one() } else { T::zero() }).collect();
    Point { id, coords }
}

/// Bits of `words`, least significant bit first within each word.
pub fn bits_of_words(words: &[u64]) -> Vec<bool> {
    words
        .iter()
        .flat_map(|&w| (0..64).map(move |k| (w >> k) & 1 == 1))
        .collect()
}
