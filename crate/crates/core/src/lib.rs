//! Data-dependent hashing for the (c, r)-approximate near neighbor problem.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: vector math, annulus rounding, the sphere-to-sphere
//!   projection, cap enclosure, smallest enclosing balls, random projections
//!   and Gaussian tail bounds.
//! * [`spherical_lsh`]: cap-carving partitions of the unit sphere together
//!   with analytic collision predictions and Monte Carlo estimators.
//! * [`euclidean_lsh`]: a data-independent partition of all of `R^d` built
//!   from quantized Gaussian projections.
//! * [`clustering`]: dense balls and caps centered at data points.
//! * [`index`]: the decision tree (cluster removal, pseudo-random splits,
//!   annulus discretization), forests, queries, audits and serialization.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar to `f64`, which is what the file
//! formats and the harness use.
// `!(x > 0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod clustering;
pub mod error;
pub mod euclidean_lsh;
pub mod geometry;
pub mod index;
pub mod parallel;
pub mod rng;
pub mod scalar;
pub mod spherical_lsh;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Dataset point with `f64` coordinates.
pub type Point = geometry::Point<f64>;
/// Dataset point with `f32` coordinates.
pub type Point32 = geometry::Point<f32>;
pub type Ball = geometry::Ball<f64>;
pub type SphereFrame = geometry::SphereFrame<f64>;
pub type SphericalPartitionSpec = spherical_lsh::SphericalPartitionSpec<f64>;
pub type GridPartitionSpec = euclidean_lsh::GridPartitionSpec<f64>;
pub type DenseCluster = clustering::DenseCluster<f64>;
pub use index::BuildParams;
pub type IndexNode = index::IndexNode<f64>;
pub type Forest = index::Forest<f64>;
/// Single-precision forest; useful when memory matters more than the last ulp.
pub type Forest32 = index::Forest<f32>;
