//! The data-dependent decision tree and forests of independent trees.
//!
//! A tree alternates three kinds of steps on the way down:
//!
//! * in general position, dense balls are split off and the remainder is
//!   cut by a random grid partition;
//! * a ball is discretized into annuli around its center and every
//!   (data annulus, query annulus) pair becomes a sphere instance;
//! * on a sphere, dense caps are enclosed in smaller balls and the
//!   remainder is cut by a spherical LSH partition.
//!
//! Small or easy instances end in leaves that are scanned or hashed.
//! Queries always verify candidates against the original indexed
//! coordinates, so every returned point is a genuine `c·r`-near neighbor.

mod audit;
mod build;
mod node;
mod query;
mod serialize;

pub use audit::{audit_tree, gap_ratio_violations, TreeAudit};
pub use node::{AnnulusChild, AnnulusSplit, BaseLsh, ClusterSplit, IndexNode, Partition, PartitionSplit, Table};
pub use query::{query_forest, query_forest_with, query_tree, QueryOutcome, QueryStats};
pub use serialize::{read_forest, write_forest, FORMAT_VERSION, MAGIC};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::Point;
use crate::parallel;
use crate::rng;
use crate::scalar::Scalar;

/// How dense caps are searched for on a sphere of radius `R` holding `m`
/// points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapSearch {
    /// Caps of radius `(√2 − ε)R` with at least `⌈τm⌉` members.
    Direct,
    /// Caps of radius `(√2 − ε²/8)R` with at least `⌈ε²τm/8⌉` members. Finding
    /// none certifies that no cap of radius `(√2 − ε)R` around an arbitrary
    /// center holds `τm` points.
    Certified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildParams {
    /// Approximation factor, `> 1`.
    pub c: f64,
    /// Near threshold.
    pub r: f64,
    /// Cap slack `ε ∈ (0, 0.5)`.
    pub eps: f64,
    /// Annulus width `δ` (absolute).
    pub delta: f64,
    /// Density fraction `τ ∈ (0, 1)`.
    pub tau: f64,
    /// Point sets this small become brute-force leaves.
    pub leaf_cutoff: usize,
    /// Maximum number of ball levels on a root-to-leaf path.
    pub max_ball_depth: usize,
    /// Maximum number of consecutive partition steps; `None` means
    /// `64·⌈log₂ n⌉`.
    pub max_run_length: Option<usize>,
    /// Above this many points cluster search runs on a sample.
    pub sample_threshold: usize,
    pub sample_size: usize,
    /// Floor on cluster sizes; `None` means `leaf_cutoff`.
    pub min_cluster_size: Option<usize>,
    pub cap_search: CapSearch,
    /// Caps per spherical partition; `None` derives it from `miss_bound`.
    pub num_caps: Option<usize>,
    /// Probability that a fixed point escapes every cap of a partition.
    pub miss_bound: f64,
    /// Upper bound on hash tables per base-case leaf.
    pub max_base_tables: usize,
    /// Relative tolerance of smallest-enclosing-ball radii.
    pub seb_tol: f64,
    pub seed: u64,
}

impl Default for BuildParams {
    fn default() -> Self {
        BuildParams {
            c: 2.0,
            r: 1.0,
            eps: 0.2,
            delta: 0.05,
            tau: 0.01,
            leaf_cutoff: 32,
            max_ball_depth: 8,
            max_run_length: None,
            sample_threshold: 4096,
            sample_size: 512,
            min_cluster_size: None,
            cap_search: CapSearch::Direct,
            num_caps: None,
            miss_bound: 1e-6,
            max_base_tables: 64,
            seb_tol: 1e-4,
            seed: 0,
        }
    }
}

impl BuildParams {
    pub fn validate(&self) -> Result<()> {
        let checks: [(bool, &str); 10] = [
            (self.c > 1.0 && self.c.is_finite(), "c must exceed 1"),
            (self.r > 0.0 && self.r.is_finite(), "r must be positive"),
            (self.eps > 0.0 && self.eps < 0.5, "eps must lie in (0, 0.5)"),
            (self.delta > 0.0 && self.delta.is_finite(), "delta must be positive"),
            (self.tau > 0.0 && self.tau < 1.0, "tau must lie in (0, 1)"),
            (self.leaf_cutoff >= 1, "leaf_cutoff must be at least 1"),
            (self.max_ball_depth >= 1, "max_ball_depth must be at least 1"),
            (self.sample_size >= 1, "sample_size must be positive"),
            (self.miss_bound > 0.0 && self.miss_bound < 1.0, "miss_bound must lie in (0, 1)"),
            (self.max_base_tables >= 1 && self.seb_tol > 0.0, "max_base_tables and seb_tol must be positive"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(invalid(*msg)),
            None => Ok(()),
        }
    }

    /// `64·⌈log₂ n⌉` unless set explicitly.
    pub fn run_length_cap(&self, n: usize) -> usize {
        self.max_run_length
            .unwrap_or_else(|| 64 * (n.max(2) as f64).log2().ceil() as usize)
    }

    pub fn cluster_floor(&self) -> usize {
        self.min_cluster_size.unwrap_or(self.leaf_cutoff).max(1)
    }

    /// `⌈4·n^{1/(2c²−1)}⌉`.
    pub fn suggested_num_trees(&self, n: usize) -> usize {
        (4.0 * (n.max(1) as f64).powf(1.0 / (2.0 * self.c * self.c - 1.0))).ceil() as usize
    }

    /// Upper bound on how many leaves may reference one point.
    pub fn branch_budget(&self) -> f64 {
        let r_max = 4.0 * self.c * self.c * self.r;
        (((r_max + self.r) / self.delta).ceil() + 1.0).powi(self.max_ball_depth as i32)
    }
}

/// How the indexed coordinates were derived from the caller's data.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IngestMeta {
    /// Indexed coordinates are original coordinates times `scale` (before
    /// any projection).
    pub scale: f64,
    pub source_dim: usize,
    /// Target dimension and seed of the random projection, if one was used.
    pub jl: Option<(usize, u64)>,
}

/// Independent trees over one point set.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest<T> {
    pub params: BuildParams,
    pub meta: IngestMeta,
    /// Indexed coordinates; `points[k].id == k`.
    pub points: Vec<Point<T>>,
    /// Optional original-space coordinates kept for reporting.
    pub original: Option<Vec<Point<T>>>,
    pub trees: Vec<IndexNode<T>>,
}

impl<T: Scalar> Forest<T> {
    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, |p| p.dim())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Seed of tree `index` in a forest built with `seed`.
pub fn tree_seed(seed: u64, index: usize) -> u64 {
    rng::derive(seed, index as u64)
}

fn check_points<T: Scalar>(points: &[Point<T>]) -> Result<usize> {
    let first = points.first().ok_or(crate::Error::Empty("cannot index an empty point set"))?;
    let d = first.dim();
    for (k, p) in points.iter().enumerate() {
        crate::geometry::check_dims(d, p.dim())?;
        if d < 2 {
            return Err(invalid("indexing needs dimension at least 2"));
        }
        if p.id as usize != k {
            return Err(invalid(format!("point ids must be positional: position {k} has id {}", p.id)));
        }
        if p.coords.iter().any(|c| !c.is_finite()) {
            return Err(invalid(format!("point {k} has a non-finite coordinate")));
        }
    }
    Ok(d)
}

/// Builds one tree with seed `seed`.
pub fn build_tree<T: Scalar>(points: &[Point<T>], params: &BuildParams, seed: u64) -> Result<IndexNode<T>> {
    params.validate()?;
    check_points(points)?;
    build::build_tree(points, params, seed)
}

/// Builds `num_trees` trees, tree `k` with seed `tree_seed(params.seed, k)`,
/// on [`parallel::declared_workers`] threads.
pub fn build_forest<T: Scalar>(points: Vec<Point<T>>, params: &BuildParams, num_trees: usize) -> Result<Forest<T>> {
    build_forest_with(points, params, num_trees, parallel::declared_workers())
}

pub fn build_forest_with<T: Scalar>(
    points: Vec<Point<T>>,
    params: &BuildParams,
    num_trees: usize,
    workers: usize,
) -> Result<Forest<T>> {
    params.validate()?;
    check_points(&points)?;
    if num_trees == 0 {
        return Err(invalid("a forest needs at least one tree"));
    }
    let indices: Vec<usize> = (0..num_trees).collect();
    let trees = parallel::map_ordered_deep(&indices, workers, |_, &k| {
        build::build_tree(&points, params, tree_seed(params.seed, k))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(Forest {
        params: params.clone(),
        meta: IngestMeta { scale: 1.0, source_dim: points[0].dim(), jl: None },
        points,
        original: None,
        trees,
    })
}

#[cfg(test)]
mod tests;
