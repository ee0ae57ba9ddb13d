//! Binary forest format. All integers and floats are little-endian; every
//! float is stored as an IEEE-754 double. Random partitions are stored as
//! their seeds and regenerated on load.
//!
//! ```text
//! "SANN" u16:version u8:scalar_bytes
//! params  meta  u64:dim u64:n  n×dim f64  u8:has_original [u64:dim n×dim f64]
//! u64:trees  tree*           (each tree is its nodes in preorder)
//! ```

use std::io::{Read, Write};

use super::node::{AnnulusChild, AnnulusSplit, BaseLsh, ClusterSplit, IndexNode, Partition, PartitionSplit, Table};
use super::{BuildParams, CapSearch, Forest, IngestMeta};
use crate::clustering::DenseCluster;
use crate::error::{Error, Result};
use crate::euclidean_lsh::sample_grid_partition;
use crate::geometry::{Point, PointId, SphereFrame};
use crate::scalar::Scalar;
use crate::spherical_lsh::sample_partition;

pub const MAGIC: &[u8; 4] = b"SANN";
pub const FORMAT_VERSION: u16 = 1;

struct W<'a, O: Write>(&'a mut O);

impl<O: Write> W<'_, O> {
    fn bytes(&mut self, b: &[u8]) -> Result<()> {
        self.0.write_all(b).map_err(Error::from)
    }
    fn u8(&mut self, v: u8) -> Result<()> {
        self.bytes(&[v])
    }
    fn u32(&mut self, v: u32) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn u64(&mut self, v: u64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn len(&mut self, v: usize) -> Result<()> {
        self.u64(v as u64)
    }
    fn f64(&mut self, v: f64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn t<T: Scalar>(&mut self, v: T) -> Result<()> {
        self.f64(v.as_f64())
    }
    fn opt(&mut self, v: Option<usize>) -> Result<()> {
        match v {
            Some(x) => {
                self.u8(1)?;
                self.len(x)
            }
            None => self.u8(0),
        }
    }
    fn ids(&mut self, ids: &[PointId]) -> Result<()> {
        self.len(ids.len())?;
        ids.iter().try_for_each(|&id| self.u32(id))
    }
    fn coords<T: Scalar>(&mut self, xs: &[T]) -> Result<()> {
        xs.iter().try_for_each(|&x| self.t(x))
    }

    fn params(&mut self, p: &BuildParams) -> Result<()> {
        for v in [p.c, p.r, p.eps, p.delta, p.tau] {
            self.f64(v)?;
        }
        self.len(p.leaf_cutoff)?;
        self.len(p.max_ball_depth)?;
        self.opt(p.max_run_length)?;
        self.len(p.sample_threshold)?;
        self.len(p.sample_size)?;
        self.opt(p.min_cluster_size)?;
        self.u8(match p.cap_search {
            CapSearch::Direct => 0,
            CapSearch::Certified => 1,
        })?;
        self.opt(p.num_caps)?;
        self.f64(p.miss_bound)?;
        self.len(p.max_base_tables)?;
        self.f64(p.seb_tol)?;
        self.u64(p.seed)
    }

    fn partition<T: Scalar>(&mut self, p: &Partition<T>) -> Result<()> {
        match p {
            Partition::Grid { spec, scale } => {
                self.u8(0)?;
                self.len(spec.dim)?;
                self.u64(spec.seed)?;
                self.t(*scale)
            }
            Partition::Spherical { spec, frame } => {
                self.u8(1)?;
                self.len(spec.dim())?;
                self.len(spec.num_caps())?;
                self.u64(spec.seed())?;
                self.coords(&frame.center)?;
                self.t(frame.radius)
            }
        }
    }

    fn node<T: Scalar>(&mut self, node: &IndexNode<T>) -> Result<()> {
        self.u8(node.tag())?;
        match node {
            IndexNode::PseudoRandomSplit(s) => {
                self.partition(&s.partition)?;
                self.len(s.children.len())?;
                for (key, child) in &s.children {
                    self.u64(*key)?;
                    self.node(child)?;
                }
                Ok(())
            }
            IndexNode::ClusterSplit(s) => {
                self.len(s.clusters.len())?;
                for (cluster, child) in &s.clusters {
                    self.u32(cluster.center_id)?;
                    self.t(cluster.radius)?;
                    self.ids(&cluster.members)?;
                    self.node(child)?;
                }
                match &s.remainder {
                    Some(rest) => {
                        self.u8(1)?;
                        self.node(rest)
                    }
                    None => self.u8(0),
                }
            }
            IndexNode::AnnulusSplit(b) => {
                self.len(b.center.len())?;
                self.coords(&b.center)?;
                for v in [b.radius, b.delta, b.r1, b.r2] {
                    self.t(v)?;
                }
                self.len(b.children.len())?;
                for c in &b.children {
                    self.u32(c.i)?;
                    self.u32(c.j)?;
                    self.t(c.r1)?;
                    self.t(c.r2)?;
                    self.node(&c.child)?;
                }
                Ok(())
            }
            IndexNode::LeafStore { id, represented } => {
                self.u32(*id)?;
                self.ids(represented)
            }
            IndexNode::LeafBruteForce { ids } => self.ids(ids),
            IndexNode::LeafBaseLsh(leaf) => {
                self.len(leaf.partitions.len())?;
                for (p, table) in leaf.partitions.iter().zip(&leaf.tables) {
                    self.partition(p)?;
                    self.len(table.buckets.len())?;
                    for (key, ids) in &table.buckets {
                        self.u64(*key)?;
                        self.ids(ids)?;
                    }
                }
                Ok(())
            }
        }
    }
}

/// Writes `forest` to `out`.
pub fn write_forest<T: Scalar, O: Write>(forest: &Forest<T>, out: &mut O) -> Result<()> {
    let mut w = W(out);
    w.bytes(MAGIC)?;
    w.bytes(&FORMAT_VERSION.to_le_bytes())?;
    w.u8(std::mem::size_of::<T>() as u8)?;
    w.params(&forest.params)?;
    w.f64(forest.meta.scale)?;
    w.len(forest.meta.source_dim)?;
    match forest.meta.jl {
        Some((dim, seed)) => {
            w.u8(1)?;
            w.len(dim)?;
            w.u64(seed)?;
        }
        None => w.u8(0)?,
    }
    w.len(forest.dim())?;
    w.len(forest.points.len())?;
    for p in &forest.points {
        w.coords(&p.coords)?;
    }
    match &forest.original {
        Some(orig) => {
            w.u8(1)?;
            w.len(orig.first().map_or(0, |p| p.dim()))?;
            for p in orig {
                w.coords(&p.coords)?;
            }
        }
        None => w.u8(0)?,
    }
    w.len(forest.trees.len())?;
    for t in &forest.trees {
        w.node(t)?;
    }
    Ok(())
}

struct R<'a, I: Read>(&'a mut I);

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Corrupt(msg.into())
}

impl<I: Read> R<'_, I> {
    fn fill<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.0.read_exact(&mut b).map_err(|e| corrupt(format!("truncated input: {e}")))?;
        Ok(b)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.fill::<1>()?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.fill()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.fill()?))
    }
    fn len(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| corrupt("length overflows usize"))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.fill()?))
    }
    fn t<T: Scalar>(&mut self) -> Result<T> {
        Ok(T::of(self.f64()?))
    }
    fn flag(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(corrupt(format!("bad flag byte {b}"))),
        }
    }
    fn opt(&mut self) -> Result<Option<usize>> {
        Ok(if self.flag()? { Some(self.len()?) } else { None })
    }
    fn ids(&mut self) -> Result<Vec<PointId>> {
        let n = self.len()?;
        (0..n).map(|_| self.u32()).collect()
    }
    fn coords<T: Scalar>(&mut self, n: usize) -> Result<Vec<T>> {
        (0..n).map(|_| self.t()).collect()
    }

    fn params(&mut self) -> Result<BuildParams> {
        let mut f = [0.0; 5];
        for v in &mut f {
            *v = self.f64()?;
        }
        Ok(BuildParams {
            c: f[0],
            r: f[1],
            eps: f[2],
            delta: f[3],
            tau: f[4],
            leaf_cutoff: self.len()?,
            max_ball_depth: self.len()?,
            max_run_length: self.opt()?,
            sample_threshold: self.len()?,
            sample_size: self.len()?,
            min_cluster_size: self.opt()?,
            cap_search: match self.u8()? {
                0 => CapSearch::Direct,
                1 => CapSearch::Certified,
                b => return Err(corrupt(format!("bad cap search tag {b}"))),
            },
            num_caps: self.opt()?,
            miss_bound: self.f64()?,
            max_base_tables: self.len()?,
            seb_tol: self.f64()?,
            seed: self.u64()?,
        })
    }

    fn partition<T: Scalar>(&mut self) -> Result<Partition<T>> {
        match self.u8()? {
            0 => {
                let dim = self.len()?;
                let seed = self.u64()?;
                let scale = self.t()?;
                Ok(Partition::Grid { spec: sample_grid_partition(dim, seed)?, scale })
            }
            1 => {
                let dim = self.len()?;
                let caps = self.len()?;
                let seed = self.u64()?;
                let center = self.coords(dim)?;
                let radius = self.t()?;
                Ok(Partition::Spherical { spec: sample_partition(dim, caps, seed)?, frame: SphereFrame::new(center, radius)? })
            }
            b => Err(corrupt(format!("bad partition tag {b}"))),
        }
    }

    fn node<T: Scalar>(&mut self) -> Result<IndexNode<T>> {
        Ok(match self.u8()? {
            0 => {
                let partition = self.partition()?;
                let n = self.len()?;
                let children = (0..n).map(|_| Ok((self.u64()?, self.node()?))).collect::<Result<_>>()?;
                IndexNode::PseudoRandomSplit(PartitionSplit { partition, children })
            }
            1 => {
                let n = self.len()?;
                let mut clusters = Vec::new();
                for _ in 0..n {
                    let center_id = self.u32()?;
                    let radius = self.t()?;
                    let members = self.ids()?;
                    clusters.push((DenseCluster { center_id, members, radius }, self.node()?));
                }
                let remainder = if self.flag()? { Some(Box::new(self.node()?)) } else { None };
                IndexNode::ClusterSplit(ClusterSplit { clusters, remainder })
            }
            2 => {
                let dim = self.len()?;
                let center = self.coords(dim)?;
                let (radius, delta, r1, r2) = (self.t()?, self.t()?, self.t()?, self.t()?);
                let n = self.len()?;
                let mut children = Vec::new();
                for _ in 0..n {
                    let (i, j) = (self.u32()?, self.u32()?);
                    let (cr1, cr2) = (self.t()?, self.t()?);
                    children.push(AnnulusChild { i, j, r1: cr1, r2: cr2, child: self.node()? });
                }
                IndexNode::AnnulusSplit(AnnulusSplit { center, radius, delta, r1, r2, children })
            }
            3 => {
                let id = self.u32()?;
                IndexNode::LeafStore { id, represented: self.ids()? }
            }
            4 => IndexNode::LeafBruteForce { ids: self.ids()? },
            5 => {
                let n = self.len()?;
                let mut partitions = Vec::new();
                let mut tables = Vec::new();
                for _ in 0..n {
                    partitions.push(self.partition()?);
                    let buckets = self.len()?;
                    let buckets = (0..buckets).map(|_| Ok((self.u64()?, self.ids()?))).collect::<Result<_>>()?;
                    tables.push(Table { buckets });
                }
                IndexNode::LeafBaseLsh(BaseLsh { partitions, tables })
            }
            b => return Err(corrupt(format!("bad node tag {b}"))),
        })
    }
}

/// Reads a forest written by [`write_forest`] with the same scalar type.
pub fn read_forest<T: Scalar, I: Read>(input: &mut I) -> Result<Forest<T>> {
    let mut r = R(input);
    if &r.fill::<4>()? != MAGIC {
        return Err(corrupt("missing SANN magic"));
    }
    let version = u16::from_le_bytes(r.fill()?);
    if version != FORMAT_VERSION {
        return Err(corrupt(format!("unsupported format version {version}")));
    }
    let width = r.u8()? as usize;
    if width != std::mem::size_of::<T>() {
        return Err(corrupt(format!("file holds {width}-byte scalars")));
    }
    let params = r.params()?;
    let scale = r.f64()?;
    let source_dim = r.len()?;
    let jl = if r.flag()? { Some((r.len()?, r.u64()?)) } else { None };
    let dim = r.len()?;
    let n = r.len()?;
    let read_points = |r: &mut R<'_, I>, dim: usize| -> Result<Vec<Point<T>>> {
        (0..n).map(|k| Ok(Point { id: k as PointId, coords: r.coords(dim)? })).collect()
    };
    let points = read_points(&mut r, dim)?;
    let original = if r.flag()? {
        let odim = r.len()?;
        Some(read_points(&mut r, odim)?)
    } else {
        None
    };
    let count = r.len()?;
    let trees = (0..count).map(|_| r.node()).collect::<Result<_>>()?;
    Ok(Forest { params, meta: IngestMeta { scale, source_dim, jl }, points, original, trees })
}
