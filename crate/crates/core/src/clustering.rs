//! Dense balls and caps whose centers are data points.
//!
//! Every search ranks qualifying centers by member count, breaking ties
//! by the smaller center id.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{check_dims, dist, dot, PointId, Point, SphereFrame};
use crate::rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseCluster<T> {
    pub center_id: PointId,
    /// Sorted ids of the points within `radius` of the center.
    pub members: Vec<PointId>,
    pub radius: T,
}

/// A cluster in terms of positions in the caller's point list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct LocalCluster {
    pub center: usize,
    pub members: Vec<usize>,
}

fn check_uniform<T: Scalar>(coords: &[&[T]]) -> Result<()> {
    if let Some(first) = coords.first() {
        for c in coords {
            check_dims(first.len(), c.len())?;
        }
    }
    Ok(())
}

fn check_radius<T: Scalar>(radius: T) -> Result<()> {
    if radius > T::zero() && radius.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("cluster radius must be positive, got {radius}")))
    }
}

fn to_cluster<T: Scalar>(ids: &[PointId], c: LocalCluster, radius: T) -> DenseCluster<T> {
    let mut members: Vec<PointId> = c.members.iter().map(|&i| ids[i]).collect();
    members.sort_unstable();
    DenseCluster { center_id: ids[c.center], members, radius }
}

fn better(ids: &[PointId], count: usize, i: usize, best: Option<(usize, usize)>) -> bool {
    match best {
        None => true,
        Some((bc, bi)) => count > bc || (count == bc && ids[i] < ids[bi]),
    }
}

/// Greedy extraction: repeatedly takes the best data-point center among the
/// points not yet removed, removes its members, and stops when no remaining
/// center has `min_count` remaining points within `radius`.
pub(crate) fn extract_exact<T: Scalar>(
    ids: &[PointId],
    coords: &[&[T]],
    radius: T,
    min_count: usize,
    max_clusters: usize,
) -> Vec<LocalCluster> {
    let n = coords.len();
    let min_count = min_count.max(1);
    if n < min_count || max_clusters == 0 {
        return Vec::new();
    }
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if dist(coords[i], coords[j]) <= radius {
                adj[i].push(j as u32);
                adj[j].push(i as u32);
            }
        }
    }
    let mut count: Vec<usize> = adj.iter().map(|a| a.len() + 1).collect();
    let mut alive = vec![true; n];
    let mut out = Vec::new();
    while out.len() < max_clusters {
        let mut best: Option<(usize, usize)> = None;
        for i in 0..n {
            if alive[i] && count[i] >= min_count && better(ids, count[i], i, best) {
                best = Some((count[i], i));
            }
        }
        let Some((_, c)) = best else { break };
        let mut members: Vec<usize> = std::iter::once(c)
            .chain(adj[c].iter().map(|&j| j as usize).filter(|&j| alive[j]))
            .collect();
        members.sort_unstable();
        for &m in &members {
            alive[m] = false;
        }
        for &m in &members {
            for &j in &adj[m] {
                count[j as usize] -= 1;
            }
        }
        out.push(LocalCluster { center: c, members });
    }
    out
}

/// Best data-point center found through a uniform sample of `sample_size`
/// points, verified against all points.
pub(crate) fn find_sampled<T: Scalar>(
    ids: &[PointId],
    coords: &[&[T]],
    radius: T,
    min_count: usize,
    sample_size: usize,
    seed: u64,
) -> Option<LocalCluster> {
    let n = coords.len();
    let min_count = min_count.max(1);
    if n < min_count {
        return None;
    }
    if sample_size >= n {
        return extract_exact(ids, coords, radius, min_count, 1).pop();
    }
    let mut g = rng::rng(seed);
    let mut sample = index::sample(&mut g, n, sample_size).into_vec();
    sample.sort_unstable();
    let need = min_count as f64 / n as f64 * sample_size as f64 / 2.0;
    let mut best: Option<(usize, usize)> = None;
    for &i in &sample {
        let local = sample.iter().filter(|&&j| dist(coords[i], coords[j]) <= radius).count();
        if (local as f64) < need {
            continue;
        }
        let full = coords.iter().filter(|c| dist(coords[i], c) <= radius).count();
        if full >= min_count && better(ids, full, i, best) {
            best = Some((full, i));
        }
    }
    let (_, c) = best?;
    let members = (0..n).filter(|&j| dist(coords[c], coords[j]) <= radius).collect();
    Some(LocalCluster { center: c, members })
}

fn split<T: Scalar>(points: &[Point<T>]) -> (Vec<PointId>, Vec<&[T]>) {
    (points.iter().map(|p| p.id).collect(), points.iter().map(|p| p.coords.as_slice()).collect())
}

fn check_cap_inputs<T: Scalar>(coords: &[&[T]], frame: &SphereFrame<T>, cap_radius: T) -> Result<()> {
    for c in coords {
        frame.check_on_sphere(c)?;
    }
    if !(cap_radius > T::zero()) || cap_radius >= frame.radius + frame.radius {
        return Err(invalid(format!("cap radius must lie in (0, 2R), got {cap_radius}")));
    }
    Ok(())
}

/// Densest ball `B(x, radius)` over data points `x`, if it holds at least
/// `min_count` points.
pub fn find_dense_ball<T: Scalar>(
    points: &[Point<T>],
    radius: T,
    min_count: usize,
) -> Result<Option<DenseCluster<T>>> {
    check_radius(radius)?;
    let (ids, coords) = split(points);
    check_uniform(&coords)?;
    Ok(extract_exact(&ids, &coords, radius, min_count, 1).pop().map(|c| to_cluster(&ids, c, radius)))
}

/// [`find_dense_ball`] for points on a sphere, with chord radius `cap_radius`.
pub fn find_dense_cap<T: Scalar>(
    points: &[Point<T>],
    frame: &SphereFrame<T>,
    cap_radius: T,
    min_count: usize,
) -> Result<Option<DenseCluster<T>>> {
    let (ids, coords) = split(points);
    check_cap_inputs(&coords, frame, cap_radius)?;
    Ok(extract_exact(&ids, &coords, cap_radius, min_count, 1).pop().map(|c| to_cluster(&ids, c, cap_radius)))
}

/// Sampled [`find_dense_ball`]: sound always, complete with high probability.
pub fn find_dense_ball_sampled<T: Scalar>(
    points: &[Point<T>],
    radius: T,
    min_count: usize,
    sample_size: usize,
    seed: u64,
) -> Result<Option<DenseCluster<T>>> {
    check_radius(radius)?;
    let (ids, coords) = split(points);
    check_uniform(&coords)?;
    Ok(find_sampled(&ids, &coords, radius, min_count, sample_size, seed).map(|c| to_cluster(&ids, c, radius)))
}

/// Sampled [`find_dense_cap`]. A sampled point becomes a candidate when its
/// sampled neighborhood holds at least half the expected share of
/// `min_count`; candidates are counted exactly against all points.
pub fn find_dense_cap_sampled<T: Scalar>(
    points: &[Point<T>],
    frame: &SphereFrame<T>,
    cap_radius: T,
    min_count: usize,
    sample_size: usize,
    seed: u64,
) -> Result<Option<DenseCluster<T>>> {
    if sample_size == 0 {
        return Err(invalid("sample size must be positive"));
    }
    let (ids, coords) = split(points);
    check_cap_inputs(&coords, frame, cap_radius)?;
    Ok(find_sampled(&ids, &coords, cap_radius, min_count, sample_size, seed)
        .map(|c| to_cluster(&ids, c, cap_radius)))
}

/// The data point `u₀` maximizing `Σᵤ ⟨u₀, u⟩` over unit points, and that sum.
pub fn vdc_best_center<T: Scalar>(points: &[Point<T>]) -> Result<(PointId, f64)> {
    let first = points.first().ok_or(Error::Empty("best center of no points"))?;
    let d = first.dim();
    let mut sum = vec![0.0f64; d];
    for p in points {
        check_dims(d, p.dim())?;
        let n = dot(&p.coords, &p.coords).as_f64().sqrt();
        if (n - 1.0).abs() > crate::spherical_lsh::unit_tolerance::<T>() {
            return Err(Error::NotUnit(n));
        }
        for (s, &x) in sum.iter_mut().zip(&p.coords) {
            *s += x.as_f64();
        }
    }
    let mut best = (first.id, f64::NEG_INFINITY);
    for p in points {
        let score: f64 = p.coords.iter().zip(&sum).map(|(&x, s)| x.as_f64() * s).sum();
        if score > best.1 || (score == best.1 && p.id < best.0) {
            best = (p.id, score);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::norm;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn gaussian_points(n: usize, d: usize, seed: u64) -> Vec<Point<f64>> {
        let mut g = rng::rng(seed);
        (0..n)
            .map(|i| Point::new(i as u32, (0..d).map(|_| g.sample(StandardNormal)).collect()).unwrap())
            .collect()
    }

    fn on_sphere(points: Vec<Point<f64>>, r: f64) -> Vec<Point<f64>> {
        points
            .into_iter()
            .map(|p| {
                let n = norm(&p.coords);
                Point::new(p.id, p.coords.iter().map(|x| r * x / n).collect()).unwrap()
            })
            .collect()
    }

    fn oracle(points: &[Point<f64>], radius: f64, min_count: usize) -> Option<(u32, Vec<u32>)> {
        let mut best: Option<(usize, u32, Vec<u32>)> = None;
        for p in points {
            let mut members: Vec<u32> = points
                .iter()
                .filter(|q| {
                    let s: f64 = p.coords.iter().zip(&q.coords).map(|(a, b)| (a - b) * (a - b)).sum();
                    s.sqrt() <= radius
                })
                .map(|q| q.id)
                .collect();
            members.sort_unstable();
            let k = members.len();
            if k >= min_count && best.as_ref().is_none_or(|(bk, bid, _)| k > *bk || (k == *bk && p.id < *bid)) {
                best = Some((k, p.id, members));
            }
        }
        best.map(|(_, id, m)| (id, m))
    }

    #[test]
    fn identical_points() {
        let pts: Vec<Point<f64>> = (0..10).map(|i| Point::new(i, vec![1.0, 2.0]).unwrap()).collect();
        let c = find_dense_ball(&pts, 0.1, 10).unwrap().unwrap();
        assert_eq!(c.center_id, 0);
        assert_eq!(c.members.len(), 10);
    }

    #[test]
    fn isolated_points() {
        let pts: Vec<Point<f64>> = (0..10).map(|i| Point::new(i, vec![3.0 * i as f64, 0.0]).unwrap()).collect();
        assert!(find_dense_ball(&pts, 1.0, 2).unwrap().is_none());
        assert!(find_dense_ball(&pts, 0.0, 2).is_err());
    }

    #[test]
    fn ball_matches_oracle() {
        for seed in 0..10 {
            let pts = gaussian_points(200, 5, seed);
            for (radius, k) in [(1.0, 5), (1.5, 20), (0.5, 2)] {
                let got = find_dense_ball(&pts, radius, k).unwrap().map(|c| (c.center_id, c.members));
                assert_eq!(got, oracle(&pts, radius, k));
            }
        }
    }

    #[test]
    fn caps() {
        let frame = SphereFrame::new(vec![0.0; 6], 2.0).unwrap();
        let pts = on_sphere(gaussian_points(200, 6, 3), 2.0);
        for (rad, k) in [(1.0, 5), (2.0, 30)] {
            let got = find_dense_cap(&pts, &frame, rad, k).unwrap().map(|c| (c.center_id, c.members));
            assert_eq!(got, oracle(&pts, rad, k));
        }
        let tight: Vec<Point<f64>> = on_sphere(
            (0..20).map(|i| Point::new(i, vec![1.0, 0.001 * i as f64, 0.0]).unwrap()).collect(),
            1.0,
        );
        let unit = SphereFrame::new(vec![0.0; 3], 1.0).unwrap();
        assert_eq!(find_dense_cap(&tight, &unit, 0.1, 20).unwrap().unwrap().members.len(), 20);

        let off = vec![Point::new(0, vec![0.5, 0.0, 0.0]).unwrap()];
        assert!(matches!(find_dense_cap(&off, &unit, 0.5, 1), Err(Error::OffSphere { .. })));
    }

    #[test]
    fn orthonormal_points_have_no_dense_cap() {
        let d = 20;
        let pts: Vec<Point<f64>> = (0..d)
            .map(|i| {
                let mut c = vec![0.0; d];
                c[i] = 3.0;
                Point::new(i as u32, c).unwrap()
            })
            .collect();
        let frame = SphereFrame::new(vec![0.0; d], 3.0).unwrap();
        assert!(find_dense_cap(&pts, &frame, 3.0, 2).unwrap().is_none());
    }

    #[test]
    fn extraction_removes_members() {
        let pts = gaussian_points(300, 3, 8);
        let (ids, coords) = split(&pts);
        let clusters = extract_exact(&ids, &coords, 1.0, 10, usize::MAX);
        let mut seen = vec![false; pts.len()];
        for c in &clusters {
            assert!(c.members.len() >= 10);
            for &m in &c.members {
                assert!(!seen[m]);
                seen[m] = true;
                assert!(dist(coords[m], coords[c.center]) <= 1.0);
            }
        }
        let rest: Vec<Point<f64>> = pts.iter().filter(|p| !seen[p.id as usize]).cloned().collect();
        assert!(find_dense_ball(&rest, 1.0, 10).unwrap().is_none());
        let first = find_dense_ball(&pts, 1.0, 10).unwrap().unwrap();
        assert_eq!(first.center_id, ids[clusters[0].center]);
    }

    #[test]
    fn vdc_examples() {
        let same: Vec<Point<f64>> = (0..5).map(|i| Point::new(i, vec![0.6, 0.8]).unwrap()).collect();
        let (id, score) = vdc_best_center(&same).unwrap();
        assert_eq!(id, 0);
        assert!((score - 5.0).abs() < 1e-12);

        let pair = vec![Point::new(4, vec![1.0, 0.0]).unwrap(), Point::new(2, vec![-1.0, 0.0]).unwrap()];
        assert_eq!(vdc_best_center(&pair).unwrap(), (2, 0.0));
        assert!(vdc_best_center(&[Point::new(0, vec![2.0, 0.0]).unwrap()]).is_err());
    }

    #[test]
    fn vdc_score_bound_in_covered_cap() {
        let d = 16;
        let mut g = rng::rng(4);
        for eps in [0.1, 0.3, 0.5] {
            let star = on_sphere(gaussian_points(1, d, 99), 1.0).remove(0);
            let mut pts = Vec::new();
            while pts.len() < 100 {
                let v: Vec<f64> = (0..d).map(|_| g.sample(StandardNormal)).collect();
                let n = norm(&v);
                let u: Vec<f64> = v.iter().map(|x| x / n).collect();
                if dot(&u, &star.coords) >= eps {
                    pts.push(Point::new(pts.len() as u32, u).unwrap());
                }
            }
            let (_, score) = vdc_best_center(&pts).unwrap();
            assert!(score >= eps * eps * 100.0);
        }
    }

    #[test]
    fn sampled_exhaustive_equals_exact() {
        let frame = SphereFrame::new(vec![0.0; 6], 1.0).unwrap();
        let pts = on_sphere(gaussian_points(150, 6, 5), 1.0);
        let a = find_dense_cap(&pts, &frame, 0.8, 5).unwrap();
        let b = find_dense_cap_sampled(&pts, &frame, 0.8, 5, 150, 1).unwrap();
        assert_eq!(a, b);
    }

    fn planted(n: usize, d: usize, seed: u64) -> Vec<Point<f64>> {
        let mut g = rng::rng(seed);
        let mut pts = on_sphere(gaussian_points(n, d, seed + 1000), 1.0);
        let center = pts[0].coords.clone();
        for p in pts.iter_mut().take(n / 2).skip(1) {
            let noise: Vec<f64> = (0..d).map(|_| 0.02 * g.sample::<f64, _>(StandardNormal)).collect();
            let v: Vec<f64> = center.iter().zip(&noise).map(|(c, e)| c + e).collect();
            let nn = norm(&v);
            p.coords = v.iter().map(|x| x / nn).collect();
        }
        pts
    }

    #[test]
    fn sampled_finds_planted_cluster() {
        let frame = SphereFrame::new(vec![0.0; 20], 1.0).unwrap();
        let pts = planted(2000, 20, 1);
        let mut found = 0;
        for seed in 0..100 {
            if let Some(c) = find_dense_cap_sampled(&pts, &frame, 0.3, 900, 400, seed).unwrap() {
                assert!(c.members.len() >= 900);
                found += 1;
            }
        }
        assert!(found >= 99);
    }

    #[test]
    fn sampled_sparse_returns_none() {
        let frame = SphereFrame::new(vec![0.0; 20], 1.0).unwrap();
        let pts = on_sphere(gaussian_points(2000, 20, 2), 1.0);
        let min_count = 200;
        assert!(oracle(&pts, 0.5, min_count / 4).is_none());
        for seed in 0..100 {
            assert!(find_dense_cap_sampled(&pts, &frame, 0.5, min_count, 400, seed).unwrap().is_none());
        }
    }
}
