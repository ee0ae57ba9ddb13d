use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::node::{IndexNode, Partition};
use crate::geometry::PointId;
use crate::rng::Fingerprint;
use crate::scalar::Scalar;

/// Structural facts about one tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeAudit {
    pub nodes: u64,
    pub node_kinds: BTreeMap<String, u64>,
    /// Ids referenced by leaves, counted with multiplicity.
    pub stored_references: u64,
    /// Ids in `0..n` that no leaf references or represents.
    pub missing: Vec<PointId>,
    pub ball_depth_max: usize,
    pub max_depth: usize,
    /// Sphere instances whose `r2/r1` is below that of the previous sphere
    /// instance on the same path.
    pub gap_ratio_violations: u64,
    /// Sphere instances whose `r2/r1` is below `(r2 − 2δ)/(r1 + 2δ)` of the
    /// ball they were cut from.
    pub gap_ratio_slack_violations: u64,
    pub fingerprint: u64,
}

/// Leaf references, counted with multiplicity.
pub(crate) fn stored_references<T>(node: &IndexNode<T>) -> u64 {
    match node {
        IndexNode::LeafStore { .. } => 1,
        IndexNode::LeafBruteForce { ids } => ids.len() as u64,
        IndexNode::LeafBaseLsh(leaf) => leaf.tables.iter().map(|t| t.len() as u64).sum(),
        _ => node.children().into_iter().map(stored_references).sum(),
    }
}

struct Walker {
    seen: Vec<bool>,
    audit: TreeAudit,
    fp: Fingerprint,
}

impl Walker {
    fn mark(&mut self, ids: &[PointId]) {
        for &id in ids {
            if let Some(s) = self.seen.get_mut(id as usize) {
                *s = true;
            }
        }
    }

    fn ids(&mut self, ids: &[PointId]) {
        self.fp.push(ids.len() as u64);
        for &id in ids {
            self.fp.push(u64::from(id));
        }
    }

    fn walk<T: Scalar>(&mut self, node: &IndexNode<T>, depth: usize, balls: usize, last_ratio: Option<f64>) {
        self.audit.nodes += 1;
        *self.audit.node_kinds.entry(node.kind().to_string()).or_default() += 1;
        self.audit.max_depth = self.audit.max_depth.max(depth);
        self.audit.ball_depth_max = self.audit.ball_depth_max.max(balls);
        self.fp.push(u64::from(node.tag()));
        match node {
            IndexNode::LeafStore { id, represented } => {
                self.audit.stored_references += 1;
                self.fp.push(u64::from(*id));
                self.mark(represented);
                self.mark(&[*id]);
            }
            IndexNode::LeafBruteForce { ids } => {
                self.audit.stored_references += ids.len() as u64;
                self.ids(ids);
                self.mark(ids);
            }
            IndexNode::LeafBaseLsh(leaf) => {
                for (part, table) in leaf.partitions.iter().zip(&leaf.tables) {
                    self.partition(part);
                    for (key, ids) in &table.buckets {
                        self.audit.stored_references += ids.len() as u64;
                        self.fp.push(*key);
                        self.ids(ids);
                        self.mark(ids);
                    }
                }
            }
            IndexNode::PseudoRandomSplit(split) => {
                self.partition(&split.partition);
                for (key, child) in &split.children {
                    self.fp.push(*key);
                    self.walk(child, depth + 1, balls, last_ratio);
                }
            }
            IndexNode::ClusterSplit(split) => {
                for (cluster, child) in &split.clusters {
                    self.fp.push(u64::from(cluster.center_id));
                    self.ids(&cluster.members);
                    self.walk(child, depth + 1, balls, last_ratio);
                }
                if let Some(rest) = &split.remainder {
                    self.walk(rest, depth + 1, balls, last_ratio);
                }
            }
            IndexNode::AnnulusSplit(ball) => {
                let two_delta = 2.0 * ball.delta.as_f64();
                let floor = (ball.r2.as_f64() - two_delta) / (ball.r1.as_f64() + two_delta);
                self.fp.push(ball.radius.as_f64().to_bits());
                for c in &ball.children {
                    self.fp.push(u64::from(c.i) << 32 | u64::from(c.j));
                    let ratio = c.r2.as_f64() / c.r1.as_f64();
                    if last_ratio.is_some_and(|prev| ratio < prev * (1.0 - 1e-9)) {
                        self.audit.gap_ratio_violations += 1;
                    }
                    if ratio < floor * (1.0 - 1e-9) {
                        self.audit.gap_ratio_slack_violations += 1;
                    }
                    self.walk(&c.child, depth + 1, balls + 1, Some(ratio));
                }
            }
        }
    }

    fn partition<T: Scalar>(&mut self, p: &Partition<T>) {
        match p {
            Partition::Grid { spec, scale } => {
                self.fp.push(spec.seed);
                self.fp.push(scale.as_f64().to_bits());
            }
            Partition::Spherical { spec, frame } => {
                self.fp.push(spec.seed());
                self.fp.push(spec.num_caps() as u64);
                self.fp.push(frame.radius.as_f64().to_bits());
            }
        }
    }
}

/// Walks `tree`, built over ids `0..n`.
pub fn audit_tree<T: Scalar>(tree: &IndexNode<T>, n: usize) -> TreeAudit {
    let mut w = Walker {
        seen: vec![false; n],
        audit: TreeAudit {
            nodes: 0,
            node_kinds: BTreeMap::new(),
            stored_references: 0,
            missing: Vec::new(),
            ball_depth_max: 0,
            max_depth: 0,
            gap_ratio_violations: 0,
            gap_ratio_slack_violations: 0,
            fingerprint: 0,
        },
        fp: Fingerprint::default(),
    };
    w.walk(tree, 0, 0, None);
    w.audit.missing = w.seen.iter().enumerate().filter(|(_, &s)| !s).map(|(k, _)| k as PointId).collect();
    w.audit.fingerprint = w.fp.finish();
    w.audit
}

/// `(literal, slack-aware)` gap-ratio violation counts; see [`TreeAudit`].
pub fn gap_ratio_violations<T: Scalar>(tree: &IndexNode<T>) -> (u64, u64) {
    let a = audit_tree(tree, 0);
    (a.gap_ratio_violations, a.gap_ratio_slack_violations)
}
