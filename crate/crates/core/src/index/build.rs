use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;

use super::node::{AnnulusChild, AnnulusSplit, BaseLsh, ClusterSplit, IndexNode, Partition, PartitionSplit, Table};
use super::{audit, BuildParams, CapSearch};
use crate::clustering::{extract_exact, find_sampled, DenseCluster, LocalCluster};
use crate::error::{Error, Result};
use crate::euclidean_lsh::sample_grid_partition;
use crate::geometry::{
    annulus_index, dist, place_on_ray, project_between_spheres, smallest_enclosing_ball_of, Ball, Point,
    PointId, SphereFrame,
};
use crate::rng::{self, Fingerprint};
use crate::scalar::Scalar;
use crate::spherical_lsh::{default_t, pair_collision_probability, sample_partition};

const SALT_PROCESS: u64 = 1;
const SALT_SPHERE: u64 = 2;
const SALT_GRID_LEAF: u64 = 3;
const SALT_SPHERE_LEAF: u64 = 4;
const SALT_SAMPLE: u64 = 5;

/// A point during the build: its id and its current routing coordinates
/// (rounded and projected copies of the indexed coordinates).
#[derive(Clone)]
struct Item<T> {
    id: PointId,
    x: Rc<[T]>,
}

struct Caps<T> {
    clusters: Vec<(LocalCluster, Ball<T>)>,
    radius: T,
}

/// Partition assignments of one set: (part key, member indices).
type Parts = Vec<(u64, Vec<usize>)>;

struct Builder<'a, T> {
    params: &'a BuildParams,
    dim: usize,
    seed: u64,
    num_caps: usize,
    max_run: usize,
    /// Sibling sphere instances (same data annulus, different query annuli)
    /// share point sets, so cap searches and partitions are reused by key.
    caps: HashMap<u64, Rc<Caps<T>>>,
    parts: HashMap<u64, Rc<Parts>>,
    /// Base-case tables by (partition seed, scale bits).
    tables: HashMap<(u64, u64), Table>,
}

fn builder<'a, T: Scalar>(points: &[Point<T>], params: &'a BuildParams, seed: u64) -> Result<(Builder<'a, T>, Vec<Item<T>>)> {
    let dim = points[0].dim();
    let num_caps = match params.num_caps {
        Some(t) => t.max(1),
        None => default_t(dim.max(2), params.miss_bound)?,
    };
    let b = Builder {
        params,
        dim,
        seed,
        num_caps,
        max_run: params.run_length_cap(points.len()),
        caps: HashMap::new(),
        parts: HashMap::new(),
        tables: HashMap::new(),
    };
    let items = points.iter().map(|p| Item { id: p.id, x: p.coords.as_slice().into() }).collect();
    Ok((b, items))
}

pub(super) fn build_tree<T: Scalar>(points: &[Point<T>], params: &BuildParams, seed: u64) -> Result<IndexNode<T>> {
    let (mut b, items) = builder(points, params, seed)?;
    let root = b.process(items, 0)?;
    let stored = audit::stored_references(&root);
    let budget = points.len() as f64 * params.branch_budget();
    if stored as f64 > budget {
        return Err(Error::ReplicationExceeded { stored, budget });
    }
    Ok(root)
}

/// Runs the ball step alone on `points`.
#[cfg(test)]
pub(super) fn build_ball<T: Scalar>(
    points: &[Point<T>],
    params: &BuildParams,
    seed: u64,
    (r1, r2): (T, T),
    ball: Ball<T>,
) -> Result<IndexNode<T>> {
    let (mut b, items) = builder(points, params, seed)?;
    b.process_ball(items, r1, r2, ball, 0)
}

/// Runs the sphere step alone on `points`, which must lie on `frame`.
#[cfg(test)]
pub(super) fn build_sphere<T: Scalar>(
    points: &[Point<T>],
    params: &BuildParams,
    seed: u64,
    (r1, r2): (T, T),
    frame: &SphereFrame<T>,
) -> Result<IndexNode<T>> {
    let (mut b, items) = builder(points, params, seed)?;
    let key = set_key(SALT_SPHERE, &items, Some((&frame.center, frame.radius)), 0);
    b.process_sphere(items, r1, r2, frame, 1, 0, key)
}

fn ids_of<T>(items: &[Item<T>]) -> Vec<PointId> {
    items.iter().map(|it| it.id).collect()
}

fn brute<T>(items: &[Item<T>]) -> IndexNode<T> {
    IndexNode::LeafBruteForce { ids: ids_of(items) }
}

fn store<T>(items: &[Item<T>]) -> IndexNode<T> {
    let mut represented = ids_of(items);
    represented.sort_unstable();
    IndexNode::LeafStore { id: represented[0], represented }
}

fn set_key<T: Scalar>(salt: u64, items: &[Item<T>], frame: Option<(&[T], T)>, run: usize) -> u64 {
    let mut f = Fingerprint::default();
    f.push(salt);
    f.push(run as u64);
    f.push(items.len() as u64);
    for it in items {
        f.push(u64::from(it.id));
    }
    if let Some((center, radius)) = frame {
        for &c in center {
            f.push(c.as_f64().to_bits());
        }
        f.push(radius.as_f64().to_bits());
    }
    f.finish()
}

impl<T: Scalar> Builder<'_, T> {
    fn p(&self, v: f64) -> T {
        T::of(v)
    }

    fn cluster_floor(&self, m: usize, fraction: f64) -> usize {
        ((fraction * m as f64).ceil() as usize).max(self.params.cluster_floor())
    }

    /// All clusters extracted greedily, exactly or through samples.
    fn find_clusters(&self, items: &[Item<T>], radius: T, min_count: usize, key: u64) -> Vec<LocalCluster> {
        let ids = ids_of(items);
        let coords: Vec<&[T]> = items.iter().map(|it| &*it.x).collect();
        if items.len() <= self.params.sample_threshold {
            return extract_exact(&ids, &coords, radius, min_count, usize::MAX);
        }
        let mut alive: Vec<usize> = (0..items.len()).collect();
        let mut out = Vec::new();
        for round in 0u64.. {
            let sub_ids: Vec<PointId> = alive.iter().map(|&k| ids[k]).collect();
            let sub: Vec<&[T]> = alive.iter().map(|&k| coords[k]).collect();
            let seed = rng::derive_all(self.seed, &[SALT_SAMPLE, key, round]);
            let Some(found) = find_sampled(&sub_ids, &sub, radius, min_count, self.params.sample_size, seed) else {
                break;
            };
            let members: Vec<usize> = found.members.iter().map(|&k| alive[k]).collect();
            let center = alive[found.center];
            let mut gone = vec![false; items.len()];
            for &m in &members {
                gone[m] = true;
            }
            alive.retain(|&k| !gone[k]);
            out.push(LocalCluster { center, members });
        }
        out
    }

    fn enclose(&self, items: &[Item<T>], members: &[usize]) -> Result<Ball<T>> {
        let coords: Vec<&[T]> = members.iter().map(|&k| &*items[k].x).collect();
        smallest_enclosing_ball_of(&coords, self.params.seb_tol)
    }

    /// Ball around the members' mean, enclosing all of them.
    fn centroid_ball(&self, items: &[Item<T>], members: &[usize]) -> Ball<T> {
        let mut o = vec![T::zero(); self.dim];
        for &k in members {
            for (a, &x) in o.iter_mut().zip(items[k].x.iter()) {
                *a += x;
            }
        }
        let m = T::of_usize(members.len());
        o.iter_mut().for_each(|a| *a /= m);
        let radius = members.iter().map(|&k| dist(&items[k].x, &o)).fold(T::zero(), T::max);
        Ball { center: o, radius }
    }

    fn dense_cluster(items: &[Item<T>], c: &LocalCluster, radius: T) -> DenseCluster<T> {
        let mut members: Vec<PointId> = c.members.iter().map(|&k| items[k].id).collect();
        members.sort_unstable();
        DenseCluster { center_id: items[c.center].id, members, radius }
    }

    /// General position: dense balls, then a grid partition of the rest.
    fn process(&mut self, items: Vec<Item<T>>, run: usize) -> Result<IndexNode<T>> {
        let prm = self.params;
        if items.len() <= prm.leaf_cutoff || run >= self.max_run {
            return Ok(brute(&items));
        }
        let key = set_key(SALT_PROCESS, &items, None, run);
        let radius = self.p(4.0 * prm.c * prm.c * prm.r);
        let min_count = self.cluster_floor(items.len(), prm.tau);
        let found = self.find_clusters(&items, radius, min_count, key);

        let mut taken = vec![false; items.len()];
        let mut clusters = Vec::with_capacity(found.len());
        for c in &found {
            let ball = self.centroid_ball(&items, &c.members);
            let members: Vec<Item<T>> = c.members.iter().map(|&k| items[k].clone()).collect();
            for &k in &c.members {
                taken[k] = true;
            }
            let child = self.process_ball(members, self.p(prm.r), self.p(prm.c * prm.r), ball, 0)?;
            clusters.push((Self::dense_cluster(&items, c, radius), child));
        }
        let rest: Vec<Item<T>> = items.into_iter().zip(&taken).filter(|(_, &t)| !t).map(|(it, _)| it).collect();
        let remainder = if rest.is_empty() {
            None
        } else if rest.len() <= prm.leaf_cutoff {
            Some(brute(&rest))
        } else {
            Some(self.grid_split(rest, run)?)
        };
        Ok(match (clusters.is_empty(), remainder) {
            (true, Some(node)) => node,
            (_, remainder) => IndexNode::ClusterSplit(ClusterSplit { clusters, remainder: remainder.map(Box::new) }),
        })
    }

    fn grid_split(&mut self, items: Vec<Item<T>>, run: usize) -> Result<IndexNode<T>> {
        let prm = self.params;
        let key = set_key(SALT_PROCESS, &items, None, run);
        let spec = sample_grid_partition(self.dim.max(2), rng::derive(self.seed, key))?;
        let m = items.len() as f64;
        let scale = self.p(m.max(std::f64::consts::E).ln() / (prm.c * prm.r * (self.dim as f64).sqrt()));
        let partition = Partition::Grid { spec, scale };
        let mut groups: BTreeMap<u64, Vec<Item<T>>> = BTreeMap::new();
        for it in items {
            groups.entry(partition.key(&it.x)).or_default().push(it);
        }
        let mut children = Vec::with_capacity(groups.len());
        for (k, part) in groups {
            children.push((k, self.process(part, run + 1)?));
        }
        Ok(IndexNode::PseudoRandomSplit(PartitionSplit { partition, children }))
    }

    /// Ball `B(o, R)`: round to annuli and build one sphere instance per
    /// admissible (data annulus, query annulus) pair.
    fn process_ball(&mut self, items: Vec<Item<T>>, r1: T, r2: T, ball: Ball<T>, depth: usize) -> Result<IndexNode<T>> {
        let prm = self.params;
        let depth = depth + 1;
        if depth > prm.max_ball_depth {
            return Err(Error::BallDepthExceeded { depth, max: prm.max_ball_depth });
        }
        let Ball { center: o, radius: big_r } = ball;
        if r1 + big_r + big_r <= r2 {
            return Ok(store(&items));
        }
        let delta = self.p(prm.delta);
        let two_delta = delta + delta;
        let (r1p, r2p) = (r1 + two_delta, r2 - two_delta);
        if r2p <= r1p {
            return Ok(brute(&items));
        }

        let mut annuli: BTreeMap<usize, Vec<Item<T>>> = BTreeMap::new();
        for it in items {
            let i = annulus_index(dist(&it.x, &o), delta);
            let x = place_on_ray(&it.x, &o, delta * T::of_usize(i));
            annuli.entry(i).or_default().push(Item { id: it.id, x: x.into() });
        }
        let j_max = ((big_r + r1) / delta).ceil().to_usize().unwrap_or(usize::MAX - 1) + 1;
        let reach = (r1p / delta).floor().to_usize().unwrap_or(usize::MAX - 2) + 1;
        let mut children = Vec::new();
        for (&i, pts) in &annuli {
            let radius_i = delta * T::of_usize(i);
            let frame = SphereFrame::new(o.clone(), radius_i)?;
            let key = set_key(SALT_SPHERE, pts, Some((&o, radius_i)), 0);
            for j in i.saturating_sub(reach).max(1)..=(i + reach).min(j_max) {
                let gap = delta * T::of_usize(i.abs_diff(j));
                if gap > r1p {
                    continue;
                }
                let radius_j = delta * T::of_usize(j);
                let (a, b) = (
                    project_between_spheres(radius_i, radius_j, r1p),
                    project_between_spheres(radius_i, radius_j, r2p),
                );
                let (child, tr1, tr2) = match (a, b) {
                    (Ok(a), Ok(b)) => (self.process_sphere(pts.clone(), a, b, &frame, depth, 0, key)?, a, b),
                    _ => (store(pts), r1p, r2p),
                };
                children.push(AnnulusChild { i: i as u32, j: j as u32, r1: tr1, r2: tr2, child });
            }
        }
        children.sort_by_key(|c| (c.j, c.i));
        Ok(IndexNode::AnnulusSplit(AnnulusSplit { center: o, radius: big_r, delta, r1, r2, children }))
    }

    fn cap_search(&self, items: &[Item<T>], radius: T) -> (T, usize) {
        let prm = self.params;
        let m = items.len();
        let sqrt2 = std::f64::consts::SQRT_2;
        let (scale, fraction) = match prm.cap_search {
            CapSearch::Direct => (sqrt2 - prm.eps, prm.tau),
            CapSearch::Certified => {
                let e2 = prm.eps * prm.eps / 8.0;
                (sqrt2 - e2, e2 * prm.tau)
            }
        };
        (radius * self.p(scale), self.cluster_floor(m, fraction))
    }

    #[allow(clippy::too_many_arguments)]
    fn process_sphere(
        &mut self,
        items: Vec<Item<T>>,
        r1: T,
        r2: T,
        frame: &SphereFrame<T>,
        depth: usize,
        run: usize,
        key: u64,
    ) -> Result<IndexNode<T>> {
        let prm = self.params;
        for it in &items {
            frame.check_on_sphere(&it.x)?;
        }
        let big_r = frame.radius;
        if r2 >= big_r + big_r {
            return Ok(store(&items));
        }
        if (r1 / r2).as_f64() <= 1.0 / (2.0 * prm.c * prm.c - 1.0) {
            return self.grid_leaf(&items, r1, r2, key);
        }
        if r2 >= big_r * self.p(std::f64::consts::SQRT_2) {
            return self.spherical_leaf(&items, r1, frame, key);
        }
        if items.len() <= prm.leaf_cutoff || run >= self.max_run {
            return Ok(brute(&items));
        }

        let caps = match self.caps.get(&key) {
            Some(c) => Rc::clone(c),
            None => {
                let (radius, min_count) = self.cap_search(&items, big_r);
                let mut clusters = Vec::new();
                for c in self.find_clusters(&items, radius, min_count, key) {
                    let ball = self.enclose(&items, &c.members)?;
                    clusters.push((c, ball));
                }
                let caps = Rc::new(Caps { clusters, radius });
                self.caps.insert(key, Rc::clone(&caps));
                caps
            }
        };
        let mut taken = vec![false; items.len()];
        let mut clusters = Vec::with_capacity(caps.clusters.len());
        for (c, ball) in &caps.clusters {
            let members: Vec<Item<T>> = c.members.iter().map(|&k| items[k].clone()).collect();
            for &k in &c.members {
                taken[k] = true;
            }
            let child = self.process_ball(members, r1, r2, ball.clone(), depth)?;
            clusters.push((Self::dense_cluster(&items, c, caps.radius), child));
        }
        let rest: Vec<Item<T>> = items.into_iter().zip(&taken).filter(|(_, &t)| !t).map(|(it, _)| it).collect();
        let remainder = if rest.is_empty() {
            None
        } else if rest.len() <= prm.leaf_cutoff {
            Some(brute(&rest))
        } else {
            Some(self.sphere_split(rest, r1, r2, frame, depth, run)?)
        };
        Ok(match (clusters.is_empty(), remainder) {
            (true, Some(node)) => node,
            (_, remainder) => IndexNode::ClusterSplit(ClusterSplit { clusters, remainder: remainder.map(Box::new) }),
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn sphere_split(
        &mut self,
        items: Vec<Item<T>>,
        r1: T,
        r2: T,
        frame: &SphereFrame<T>,
        depth: usize,
        run: usize,
    ) -> Result<IndexNode<T>> {
        let key = set_key(SALT_SPHERE, &items, Some((&frame.center, frame.radius)), run);
        let spec = sample_partition(self.dim.max(2), self.num_caps, rng::derive(self.seed, key))?;
        let partition = Partition::Spherical { spec, frame: frame.clone() };
        let parts = match self.parts.get(&key) {
            Some(p) => Rc::clone(p),
            None => {
                let coords: Vec<&[T]> = items.iter().map(|it| &*it.x).collect();
                let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
                for (k, part) in partition.keys(&coords).into_iter().enumerate() {
                    groups.entry(part).or_default().push(k);
                }
                let parts = Rc::new(groups.into_iter().collect::<Vec<_>>());
                self.parts.insert(key, Rc::clone(&parts));
                parts
            }
        };
        let mut children = Vec::with_capacity(parts.len());
        for (part, members) in parts.iter() {
            let sub: Vec<Item<T>> = members.iter().map(|&k| items[k].clone()).collect();
            let sub_key = set_key(SALT_SPHERE, &sub, Some((&frame.center, frame.radius)), run + 1);
            children.push((*part, self.process_sphere(sub, r1, r2, frame, depth, run + 1, sub_key)?));
        }
        Ok(IndexNode::PseudoRandomSplit(PartitionSplit { partition, children }))
    }

    fn table_count(&self, p1: f64) -> usize {
        let k = if p1 > 0.0 { (3.0 / p1).ceil() } else { f64::INFINITY };
        (k.min(self.params.max_base_tables as f64) as usize).max(1)
    }

    fn table(&mut self, items: &[Item<T>], seed: u64, part: &Partition<T>) -> Table {
        let bits = match part {
            Partition::Grid { scale, .. } => scale.as_f64().to_bits(),
            Partition::Spherical { .. } => 0,
        };
        self.tables
            .entry((seed, bits))
            .or_insert_with(|| {
                let coords: Vec<&[T]> = items.iter().map(|it| &*it.x).collect();
                let mut buckets: BTreeMap<u64, Vec<PointId>> = BTreeMap::new();
                for (k, key) in part.keys(&coords).into_iter().enumerate() {
                    buckets.entry(key).or_default().push(items[k].id);
                }
                Table { buckets: buckets.into_iter().collect() }
            })
            .clone()
    }

    /// Grid hashing scaled so that pairs at `r2` collide with probability
    /// about `1/m`.
    fn grid_leaf(&mut self, items: &[Item<T>], r1: T, r2: T, key: u64) -> Result<IndexNode<T>> {
        let m = items.len() as f64;
        let sqrt_d = (self.dim as f64).sqrt();
        let s = m.max(std::f64::consts::E).ln() / (r2.as_f64() * sqrt_d);
        let p1 = (-s * r1.as_f64() * sqrt_d).exp();
        let (mut partitions, mut tables) = (Vec::new(), Vec::new());
        for k in 0..self.table_count(p1) {
            let seed = rng::derive_all(self.seed, &[SALT_GRID_LEAF, key, k as u64]);
            let part = Partition::Grid { spec: sample_grid_partition(self.dim.max(2), seed)?, scale: self.p(s) };
            tables.push(self.table(items, seed, &part));
            partitions.push(part);
        }
        Ok(IndexNode::LeafBaseLsh(BaseLsh { partitions, tables }))
    }

    fn spherical_leaf(&mut self, items: &[Item<T>], r1: T, frame: &SphereFrame<T>, key: u64) -> Result<IndexNode<T>> {
        let tau = (r1 / frame.radius).as_f64().min(2.0);
        let p1 = pair_collision_probability(tau, self.dim.max(2))?;
        let (mut partitions, mut tables) = (Vec::new(), Vec::new());
        for k in 0..self.table_count(p1) {
            let seed = rng::derive_all(self.seed, &[SALT_SPHERE_LEAF, key, k as u64]);
            let part = Partition::Spherical {
                spec: sample_partition(self.dim.max(2), self.num_caps, seed)?,
                frame: frame.clone(),
            };
            tables.push(self.table(items, seed, &part));
            partitions.push(part);
        }
        Ok(IndexNode::LeafBaseLsh(BaseLsh { partitions, tables }))
    }
}
