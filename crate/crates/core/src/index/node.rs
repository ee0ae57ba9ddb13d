use crate::clustering::DenseCluster;
use crate::euclidean_lsh::GridPartitionSpec;
use crate::geometry::{PointId, SphereFrame};
use crate::scalar::Scalar;
use crate::spherical_lsh::SphericalPartitionSpec;

/// A random partition together with the frame it is evaluated in.
#[derive(Debug, Clone, PartialEq)]
pub enum Partition<T> {
    /// Grid partition of `ℝ^d`, applied to `scale · x`.
    Grid { spec: GridPartitionSpec<T>, scale: T },
    /// Spherical partition of the sphere `frame`, applied to `(x − o)/R`.
    Spherical { spec: SphericalPartitionSpec<T>, frame: SphereFrame<T> },
}

impl<T: Scalar> Partition<T> {
    /// Part key of `x`: the grid key digest or the spherical part index.
    pub fn key(&self, x: &[T]) -> u64 {
        match self {
            Partition::Grid { spec, scale } => spec.key_digest(x, *scale),
            Partition::Spherical { spec, frame } => spec.locate_unchecked(&frame.to_unit(x)) as u64,
        }
    }

    /// Keys of many points; agrees with [`Self::key`].
    pub fn keys(&self, xs: &[&[T]]) -> Vec<u64> {
        match self {
            Partition::Grid { .. } => xs.iter().map(|x| self.key(x)).collect(),
            Partition::Spherical { spec, frame } => {
                let units: Vec<Vec<T>> = xs.iter().map(|x| frame.to_unit(x)).collect();
                let refs: Vec<&[T]> = units.iter().map(|u| u.as_slice()).collect();
                spec.locate_batch(&refs).into_iter().map(|k| k as u64).collect()
            }
        }
    }
}

/// Hash table from part key to point ids, sorted by key.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub buckets: Vec<(u64, Vec<PointId>)>,
}

impl Table {
    pub fn get(&self, key: u64) -> &[PointId] {
        match self.buckets.binary_search_by_key(&key, |(k, _)| *k) {
            Ok(pos) => &self.buckets[pos].1,
            Err(_) => &[],
        }
    }

    pub fn len(&self) -> usize {
        self.buckets.iter().map(|(_, ids)| ids.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSplit<T> {
    pub partition: Partition<T>,
    /// Nonempty parts, sorted by key.
    pub children: Vec<(u64, IndexNode<T>)>,
}

impl<T> PartitionSplit<T> {
    pub fn child(&self, key: u64) -> Option<&IndexNode<T>> {
        self.children.binary_search_by_key(&key, |(k, _)| *k).ok().map(|pos| &self.children[pos].1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSplit<T> {
    pub clusters: Vec<(DenseCluster<T>, IndexNode<T>)>,
    pub remainder: Option<Box<IndexNode<T>>>,
}

/// A ball `B(center, radius)` cut into annuli of width `delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnulusSplit<T> {
    pub center: Vec<T>,
    pub radius: T,
    pub delta: T,
    pub r1: T,
    pub r2: T,
    /// Sorted by `(j, i)`.
    pub children: Vec<AnnulusChild<T>>,
}

/// Sphere instance for data annulus `i` and query annulus `j`, with the
/// thresholds `r1`, `r2` valid on the sphere of radius `δi`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnulusChild<T> {
    pub i: u32,
    pub j: u32,
    pub r1: T,
    pub r2: T,
    pub child: IndexNode<T>,
}

impl<T> AnnulusSplit<T> {
    /// Children whose query annulus is `j`.
    pub fn for_query_annulus(&self, j: u32) -> &[AnnulusChild<T>] {
        let lo = self.children.partition_point(|c| c.j < j);
        let hi = self.children.partition_point(|c| c.j <= j);
        &self.children[lo..hi]
    }
}

/// One hash table per partition; a query probes its own bucket in each.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseLsh<T> {
    pub partitions: Vec<Partition<T>>,
    pub tables: Vec<Table>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum IndexNode<T> {
    PseudoRandomSplit(PartitionSplit<T>),
    ClusterSplit(ClusterSplit<T>),
    AnnulusSplit(AnnulusSplit<T>),
    /// One stored point answers for the whole set `represented`.
    LeafStore { id: PointId, represented: Vec<PointId> },
    LeafBruteForce { ids: Vec<PointId> },
    LeafBaseLsh(BaseLsh<T>),
}

impl<T> IndexNode<T> {
    pub fn kind(&self) -> &'static str {
        match self {
            IndexNode::PseudoRandomSplit(_) => "pseudo_random_split",
            IndexNode::ClusterSplit(_) => "cluster_split",
            IndexNode::AnnulusSplit(_) => "annulus_split",
            IndexNode::LeafStore { .. } => "leaf_store",
            IndexNode::LeafBruteForce { .. } => "leaf_brute_force",
            IndexNode::LeafBaseLsh(_) => "leaf_base_lsh",
        }
    }

    /// Stable numeric tag of the variant.
    pub fn tag(&self) -> u8 {
        match self {
            IndexNode::PseudoRandomSplit(_) => 0,
            IndexNode::ClusterSplit(_) => 1,
            IndexNode::AnnulusSplit(_) => 2,
            IndexNode::LeafStore { .. } => 3,
            IndexNode::LeafBruteForce { .. } => 4,
            IndexNode::LeafBaseLsh(_) => 5,
        }
    }

    /// Direct children in query order.
    pub fn children(&self) -> Vec<&IndexNode<T>> {
        match self {
            IndexNode::PseudoRandomSplit(s) => s.children.iter().map(|(_, c)| c).collect(),
            IndexNode::ClusterSplit(s) => {
                s.clusters.iter().map(|(_, c)| c).chain(s.remainder.as_deref()).collect()
            }
            IndexNode::AnnulusSplit(s) => s.children.iter().map(|c| &c.child).collect(),
            _ => Vec::new(),
        }
    }
}
