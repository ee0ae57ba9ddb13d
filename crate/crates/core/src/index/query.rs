use serde::{Deserialize, Serialize};

use super::node::IndexNode;
use super::Forest;
use crate::error::{invalid, Result};
use crate::geometry::{annulus_index, check_dims, dist, place_on_ray, PointId};
use crate::scalar::Scalar;

/// Work done by one query.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryStats {
    pub nodes_visited: u64,
    pub candidates_examined: u64,
    /// Most annulus splits on any visited root-to-node path.
    pub ball_depth_max: u64,
    pub distance_computations: u64,
    pub trees_queried: u64,
}

impl QueryStats {
    pub fn add(&mut self, other: &QueryStats) {
        self.nodes_visited += other.nodes_visited;
        self.candidates_examined += other.candidates_examined;
        self.ball_depth_max = self.ball_depth_max.max(other.ball_depth_max);
        self.distance_computations += other.distance_computations;
        self.trees_queried += other.trees_queried;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryOutcome {
    /// A point within `c·r` of the query, if one was found.
    pub hit: Option<PointId>,
    pub stats: QueryStats,
}

struct Ctx<'a, T, F> {
    forest: &'a Forest<T>,
    q: &'a [T],
    limit: T,
    accept: &'a F,
    stats: QueryStats,
}

impl<T: Scalar, F: Fn(PointId) -> bool> Ctx<'_, T, F> {
    fn verify(&mut self, id: PointId) -> bool {
        self.stats.candidates_examined += 1;
        self.stats.distance_computations += 1;
        let Some(p) = self.forest.points.get(id as usize) else { return false };
        dist(&p.coords, self.q) <= self.limit && (self.accept)(id)
    }

    fn scan(&mut self, ids: &[PointId]) -> Option<PointId> {
        ids.iter().copied().find(|&id| self.verify(id))
    }

    /// `route` is the query as seen by `node`: rounded and projected the
    /// same way the node's points were during the build.
    fn visit(&mut self, node: &IndexNode<T>, route: &[T], depth: u64) -> Option<PointId> {
        self.stats.nodes_visited += 1;
        self.stats.ball_depth_max = self.stats.ball_depth_max.max(depth);
        match node {
            IndexNode::LeafStore { id, .. } => self.scan(&[*id]),
            IndexNode::LeafBruteForce { ids } => self.scan(ids),
            IndexNode::LeafBaseLsh(leaf) => {
                for (part, table) in leaf.partitions.iter().zip(&leaf.tables) {
                    if let Some(hit) = self.scan(table.get(part.key(route))) {
                        return Some(hit);
                    }
                }
                None
            }
            IndexNode::ClusterSplit(split) => {
                for (_, child) in &split.clusters {
                    if let Some(hit) = self.visit(child, route, depth) {
                        return Some(hit);
                    }
                }
                split.remainder.as_deref().and_then(|rest| self.visit(rest, route, depth))
            }
            IndexNode::PseudoRandomSplit(split) => {
                let key = split.partition.key(route);
                split.child(key).and_then(|child| self.visit(child, route, depth))
            }
            IndexNode::AnnulusSplit(ball) => {
                self.stats.distance_computations += 1;
                let d = dist(route, &ball.center);
                if d > ball.radius + ball.r1 {
                    return None;
                }
                let j = annulus_index(d, ball.delta) as u32;
                for child in ball.for_query_annulus(j) {
                    let projected = place_on_ray(route, &ball.center, ball.delta * T::of_usize(child.i as usize));
                    if let Some(hit) = self.visit(&child.child, &projected, depth + 1) {
                        return Some(hit);
                    }
                }
                None
            }
        }
    }
}

fn prepare<T: Scalar>(forest: &Forest<T>, q: &[T]) -> Result<T> {
    check_dims(forest.dim(), q.len())?;
    if q.iter().any(|v| !v.is_finite()) {
        return Err(invalid("query has a non-finite coordinate"));
    }
    Ok(T::of(forest.params.c * forest.params.r))
}

/// Queries tree `tree` of `forest`.
pub fn query_tree<T: Scalar>(forest: &Forest<T>, tree: usize, q: &[T]) -> Result<QueryOutcome> {
    let limit = prepare(forest, q)?;
    let node = forest.trees.get(tree).ok_or_else(|| invalid(format!("no tree {tree}")))?;
    let mut ctx = Ctx { forest, q, limit, accept: &|_| true, stats: QueryStats::default() };
    ctx.stats.trees_queried = 1;
    let hit = ctx.visit(node, q, 0);
    Ok(QueryOutcome { hit, stats: ctx.stats })
}

/// Queries the trees in order and returns the first hit.
pub fn query_forest<T: Scalar>(forest: &Forest<T>, q: &[T]) -> Result<QueryOutcome> {
    query_forest_with(forest, q, forest.trees.len(), |_| true)
}

/// [`query_forest`] over the first `max_trees` trees, additionally requiring
/// `accept(id)` of every returned point.
pub fn query_forest_with<T: Scalar, F: Fn(PointId) -> bool>(
    forest: &Forest<T>,
    q: &[T],
    max_trees: usize,
    accept: F,
) -> Result<QueryOutcome> {
    let limit = prepare(forest, q)?;
    let mut ctx = Ctx { forest, q, limit, accept: &accept, stats: QueryStats::default() };
    for tree in forest.trees.iter().take(max_trees) {
        ctx.stats.trees_queried += 1;
        if let Some(hit) = ctx.visit(tree, q, 0) {
            return Ok(QueryOutcome { hit: Some(hit), stats: ctx.stats });
        }
    }
    Ok(QueryOutcome { hit: None, stats: ctx.stats })
}
