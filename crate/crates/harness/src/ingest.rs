//! From caller coordinates to indexed coordinates: rescale so that `r = 1`,
//! then optionally apply a Johnson–Lindenstrauss projection.

use anyhow::{ensure, Context, Result};
use sann_core::geometry::{dist, JlProjection, PointId};
use sann_core::index::{self, IngestMeta, QueryOutcome};
use sann_core::{rng, BuildParams, Forest, Point};
use serde::{Deserialize, Serialize};

const JL_SALT: u64 = 0x4a4c;

/// Target dimension of the random projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JlDim {
    /// [`default_jl_target`] of the point count.
    #[default]
    Auto,
    Off,
    Fixed(usize),
}

/// `⌈max(32, log₂n · log₂(log₂n + 2))⌉`.
pub fn default_jl_target(n: usize) -> usize {
    let l = (n.max(2) as f64).log2();
    (l * (l + 2.0).log2()).max(32.0).ceil() as usize
}

#[derive(Debug, Clone)]
pub struct Ingest {
    pub scale: f64,
    pub source_dim: usize,
    pub jl: Option<JlProjection>,
}

impl Ingest {
    pub fn new(source_dim: usize, n: usize, params: &BuildParams, jl: JlDim) -> Result<Self> {
        ensure!(params.r > 0.0, "r must be positive");
        let target = match jl {
            JlDim::Auto => Some(default_jl_target(n)),
            JlDim::Off => None,
            JlDim::Fixed(k) => Some(k),
        }
        .filter(|&k| k < source_dim);
        let jl = target
            .map(|k| JlProjection::new(source_dim, k, rng::derive(params.seed, JL_SALT)))
            .transpose()?;
        Ok(Ingest { scale: 1.0 / params.r, source_dim, jl })
    }

    pub fn from_meta(meta: &IngestMeta) -> Result<Self> {
        let jl = meta.jl.map(|(k, seed)| JlProjection::new(meta.source_dim, k, seed)).transpose()?;
        Ok(Ingest { scale: meta.scale, source_dim: meta.source_dim, jl })
    }

    pub fn meta(&self) -> IngestMeta {
        IngestMeta { scale: self.scale, source_dim: self.source_dim, jl: self.jl.as_ref().map(|p| (p.target_dim(), p.seed())) }
    }

    pub fn target_dim(&self) -> usize {
        self.jl.as_ref().map_or(self.source_dim, |p| p.target_dim())
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        ensure!(x.len() == self.source_dim, "expected dimension {}, got {}", self.source_dim, x.len());
        let scaled: Vec<f64> = x.iter().map(|v| v * self.scale).collect();
        match &self.jl {
            Some(p) => Ok(p.apply(&scaled)?),
            None => Ok(scaled),
        }
    }

    /// Length parameters in indexed units.
    pub fn index_params(&self, params: &BuildParams) -> BuildParams {
        BuildParams { r: params.r * self.scale, delta: params.delta * self.scale, ..params.clone() }
    }
}

/// Rescales and projects `data`, then builds `num_trees` trees. The forest
/// keeps the original coordinates.
pub fn build_index(data: &[Vec<f64>], params: &BuildParams, num_trees: usize, jl: JlDim, workers: usize) -> Result<Forest> {
    let first = data.first().context("no data points")?;
    let ingest = Ingest::new(first.len(), data.len(), params, jl)?;
    let points = data
        .iter()
        .enumerate()
        .map(|(k, x)| Ok(Point { id: k as PointId, coords: ingest.apply(x)? }))
        .collect::<Result<Vec<_>>>()?;
    let mut forest = index::build_forest_with(points, &ingest.index_params(params), num_trees, workers)?;
    forest.meta = ingest.meta();
    forest.original = Some(data.iter().enumerate().map(|(k, x)| Point { id: k as PointId, coords: x.clone() }).collect());
    Ok(forest)
}

/// Queries the first `max_trees` trees. With `verify_original`, returned
/// points must also lie within `c·r` of `q` in the original space.
pub fn query(forest: &Forest, ingest: &Ingest, q: &[f64], max_trees: usize, verify_original: bool) -> Result<QueryOutcome> {
    let routed = ingest.apply(q)?;
    let limit = forest.params.c * forest.params.r / ingest.scale;
    let original = forest.original.as_deref();
    let out = if verify_original {
        let orig = original.context("forest has no original coordinates")?;
        index::query_forest_with(forest, &routed, max_trees, |id| dist(&orig[id as usize].coords, q) <= limit)?
    } else {
        index::query_forest_with(forest, &routed, max_trees, |_| true)?
    };
    Ok(out)
}
