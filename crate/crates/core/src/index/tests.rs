use proptest::prelude::*;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::build::{build_ball, build_sphere};
use super::*;
use crate::geometry::{dist, project_between_spheres, Ball, PointId, SphereFrame};
use crate::rng::rng;

fn gaussian(d: usize, r: &mut crate::rng::Rng) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(r)).collect()
}

fn on_sphere(n: usize, d: usize, radius: f64, seed: u64) -> Vec<Point<f64>> {
    let mut r = rng(seed);
    (0..n)
        .map(|k| {
            let g = gaussian(d, &mut r);
            let s = radius / g.iter().map(|v| v * v).sum::<f64>().sqrt();
            Point { id: k as PointId, coords: g.iter().map(|v| v * s).collect() }
        })
        .collect()
}

/// Uniform points in a cube plus a few tight clumps.
fn mixed(n: usize, d: usize, seed: u64) -> Vec<Point<f64>> {
    let mut r = rng(seed);
    let centers: Vec<Vec<f64>> = (0..4).map(|_| (0..d).map(|_| r.random_range(-40.0..40.0)).collect()).collect();
    (0..n)
        .map(|k| {
            let coords = if k % 3 == 0 {
                (0..d).map(|_| r.random_range(-40.0..40.0)).collect()
            } else {
                let c = &centers[k % 4];
                let g = gaussian(d, &mut r);
                c.iter().zip(g).map(|(c, g)| c + 0.3 * g).collect()
            };
            Point { id: k as PointId, coords }
        })
        .collect()
}

fn small_params() -> BuildParams {
    BuildParams { leaf_cutoff: 8, ..BuildParams::default() }
}

#[test]
fn small_sets_are_scanned() {
    let pts = mixed(20, 4, 1);
    let tree = build_tree(&pts, &BuildParams::default(), 7).unwrap();
    match tree {
        IndexNode::LeafBruteForce { ids } => assert_eq!(ids, (0..20).collect::<Vec<_>>()),
        other => panic!("expected a brute-force leaf, got {}", other.kind()),
    }
}

#[test]
fn one_dense_ball_becomes_one_cluster() {
    let mut r = rng(2);
    let pts: Vec<Point<f64>> =
        (0..200).map(|k| Point { id: k, coords: gaussian(6, &mut r).iter().map(|v| 0.2 * v).collect() }).collect();
    let tree = build_tree(&pts, &small_params(), 3).unwrap();
    let IndexNode::ClusterSplit(split) = &tree else { panic!("expected a cluster split, got {}", tree.kind()) };
    assert_eq!(split.clusters.len(), 1);
    assert!(split.remainder.is_none());
    assert_eq!(split.clusters[0].0.members.len(), 200);
    assert_eq!(split.clusters[0].1.kind(), "annulus_split");
}

#[test]
fn every_point_is_covered_and_ball_depth_is_bounded() {
    let pts = mixed(600, 12, 4);
    let params = small_params();
    for seed in 0..3 {
        let tree = build_tree(&pts, &params, seed).unwrap();
        let a = audit_tree(&tree, pts.len());
        assert!(a.missing.is_empty(), "missing {:?}", a.missing);
        assert!(a.ball_depth_max <= params.max_ball_depth);
        assert!(a.ball_depth_max >= 1);
        assert_eq!(a.gap_ratio_slack_violations, 0);
        assert!(a.stored_references as f64 <= pts.len() as f64 * params.branch_budget());
    }
}

#[test]
fn wide_gap_ball_is_stored() {
    let pts = on_sphere(50, 5, 3.0, 5);
    let ball = Ball { center: vec![0.0; 5], radius: 4.0 };
    let node = build_ball(&pts, &small_params(), 1, (1.0, 10.0), ball).unwrap();
    assert_eq!(node.kind(), "leaf_store");
}

#[test]
fn vanishing_gap_ball_is_scanned() {
    let pts = on_sphere(50, 5, 3.0, 5);
    let params = BuildParams { delta: 0.5, ..small_params() };
    let ball = Ball { center: vec![0.0; 5], radius: 4.0 };
    let node = build_ball(&pts, &params, 1, (1.0, 2.5), ball).unwrap();
    assert_eq!(node.kind(), "leaf_brute_force");
}

#[test]
fn ball_children_sit_on_annuli() {
    let pts = on_sphere(80, 6, 2.0, 6);
    let ball = Ball { center: vec![0.0; 6], radius: 2.0 };
    let node = build_ball(&pts, &small_params(), 1, (1.0, 2.0), ball).unwrap();
    let IndexNode::AnnulusSplit(split) = node else { panic!("expected an annulus split") };
    assert!(!split.children.is_empty());
    assert!(split.children.iter().all(|c| (40..=41).contains(&c.i) && c.i.abs_diff(c.j) <= 23));
    assert!(split.children.windows(2).all(|w| (w[0].j, w[0].i) < (w[1].j, w[1].i)));
}

#[test]
fn sphere_leaves() {
    let frame = |r: f64| SphereFrame::new(vec![0.0; 6], r).unwrap();
    let params = small_params();

    let pts = on_sphere(40, 6, 0.4, 8);
    let node = build_sphere(&pts, &params, 1, (0.2, 1.0), &frame(0.4)).unwrap();
    assert_eq!(node.kind(), "leaf_store");

    let pts = on_sphere(40, 6, 4.0, 9);
    let node = build_sphere(&pts, &params, 1, (1.0, 7.5), &frame(4.0)).unwrap();
    let IndexNode::LeafBaseLsh(leaf) = &node else { panic!("expected a grid leaf, got {}", node.kind()) };
    assert!(matches!(leaf.partitions[0], Partition::Grid { .. }));

    let pts = on_sphere(40, 6, 1.0, 10);
    let node = build_sphere(&pts, &params, 1, (1.0, 1.5), &frame(1.0)).unwrap();
    let IndexNode::LeafBaseLsh(leaf) = &node else { panic!("expected a spherical leaf, got {}", node.kind()) };
    assert!(matches!(leaf.partitions[0], Partition::Spherical { .. }));
    assert!(leaf.partitions.len() <= params.max_base_tables);
    for table in &leaf.tables {
        assert_eq!(table.len(), 40);
    }
}

#[test]
fn off_sphere_points_are_rejected() {
    let mut pts = on_sphere(40, 6, 1.0, 11);
    pts[3].coords[0] += 0.1;
    let frame = SphereFrame::new(vec![0.0; 6], 1.0).unwrap();
    assert!(build_sphere(&pts, &small_params(), 1, (0.5, 0.9), &frame).is_err());
}

#[test]
fn projection_never_shrinks_the_gap_ratio() {
    for a in 1..=30 {
        for b in 1..=30 {
            let (ra, rb) = (0.1 * a as f64, 0.1 * b as f64);
            for (r1, r2) in [(0.5, 1.0), (1.0, 2.0), (0.3, 3.0), (2.0, 2.5)] {
                if let (Ok(p1), Ok(p2)) =
                    (project_between_spheres(ra, rb, r1), project_between_spheres(ra, rb, r2))
                {
                    if p1 > 0.0 {
                        assert!(p2 / p1 >= r2 / r1 - 1e-12, "{ra} {rb} {r1} {r2}");
                    }
                }
            }
        }
    }
}

#[test]
fn builds_are_deterministic() {
    let pts = mixed(400, 10, 12);
    let params = small_params();
    let a = build_forest_with(pts.clone(), &params, 3, 1).unwrap();
    let b = build_forest_with(pts.clone(), &params, 3, 2).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.trees[1], build_tree(&pts, &params, tree_seed(params.seed, 1)).unwrap());
}

#[test]
fn distinct_seeds_give_distinct_trees() {
    let pts = mixed(400, 10, 13);
    let params = small_params();
    let fps: Vec<u64> = (0..4).map(|s| audit_tree(&build_tree(&pts, &params, s).unwrap(), 400).fingerprint).collect();
    for i in 0..fps.len() {
        for j in 0..i {
            assert_ne!(fps[i], fps[j]);
        }
    }
}

#[test]
fn hits_are_near_and_forests_dominate_trees() {
    let pts = mixed(500, 8, 14);
    let params = small_params();
    let forest = build_forest_with(pts.clone(), &params, 4, 1).unwrap();
    let mut r = rng(15);
    let mut tree_hits = 0;
    for k in 0..200 {
        let base = &pts[(k * 7) % pts.len()].coords;
        let q: Vec<f64> = base.iter().map(|v| v + 0.3 * gaussian(1, &mut r)[0]).collect();
        let one = query_tree(&forest, 0, &q).unwrap();
        let all = query_forest(&forest, &q).unwrap();
        for hit in [one.hit, all.hit].into_iter().flatten() {
            assert!(dist(&pts[hit as usize].coords, &q) <= params.c * params.r);
        }
        if one.hit.is_some() {
            tree_hits += 1;
            assert!(all.hit.is_some());
        }
        assert!(all.stats.trees_queried <= 4);
    }
    assert!(tree_hits > 0);
}

#[test]
fn accept_filter_is_applied() {
    let pts = mixed(300, 6, 16);
    let forest = build_forest_with(pts.clone(), &small_params(), 2, 1).unwrap();
    let q = pts[1].coords.clone();
    assert!(query_forest(&forest, &q).unwrap().hit.is_some());
    let out = query_forest_with(&forest, &q, 2, |id| id % 2 == 0).unwrap();
    assert!(out.hit.is_none_or(|id| id % 2 == 0));
}

#[test]
fn invalid_inputs_are_rejected() {
    let params = BuildParams::default();
    assert!(build_tree::<f64>(&[], &params, 0).is_err());
    let one_d: Vec<Point<f64>> = (0..5).map(|k| Point { id: k, coords: vec![k as f64] }).collect();
    assert!(build_tree(&one_d, &params, 0).is_err());
    let mut shuffled = mixed(10, 3, 1);
    shuffled.swap(0, 1);
    assert!(build_tree(&shuffled, &params, 0).is_err());
    assert!(build_tree(&mixed(10, 3, 1), &BuildParams { c: 1.0, ..params.clone() }, 0).is_err());
    let forest = build_forest_with(mixed(10, 3, 1), &params, 1, 1).unwrap();
    assert!(query_forest(&forest, &[0.0, 0.0]).is_err());
    assert!(query_forest(&forest, &[0.0, f64::NAN, 0.0]).is_err());
}

#[test]
fn ball_depth_limit_is_enforced() {
    let mut r = rng(17);
    let pts: Vec<Point<f64>> =
        (0..300).map(|k| Point { id: k, coords: gaussian(5, &mut r).iter().map(|v| 0.05 * v).collect() }).collect();
    let params = BuildParams { max_ball_depth: 1, ..small_params() };
    match build_tree(&pts, &params, 1) {
        Ok(tree) => assert!(audit_tree(&tree, 300).ball_depth_max <= 1),
        Err(e) => assert!(matches!(e, crate::Error::BallDepthExceeded { .. })),
    }
}

#[test]
fn serialization_round_trips_bit_exactly() {
    let pts = mixed(300, 7, 18);
    let mut forest = build_forest_with(pts.clone(), &small_params(), 2, 1).unwrap();
    forest.original = Some(pts);
    forest.meta = IngestMeta { scale: 0.5, source_dim: 9, jl: Some((7, 99)) };
    let mut bytes = Vec::new();
    write_forest(&forest, &mut bytes).unwrap();
    assert_eq!(&bytes[..4], MAGIC);
    let back: Forest<f64> = read_forest(&mut bytes.as_slice()).unwrap();
    assert_eq!(back, forest);
    let mut again = Vec::new();
    write_forest(&back, &mut again).unwrap();
    assert_eq!(again, bytes);

    assert!(read_forest::<f32, _>(&mut bytes.as_slice()).is_err());
    assert!(read_forest::<f64, _>(&mut &bytes[..bytes.len() - 3]).is_err());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(read_forest::<f64, _>(&mut bad.as_slice()).is_err());
}

#[test]
fn single_precision_forest_round_trips() {
    let pts: Vec<Point<f32>> = mixed(200, 5, 19)
        .into_iter()
        .map(|p| Point { id: p.id, coords: p.coords.iter().map(|&v| v as f32).collect() })
        .collect();
    let forest = build_forest_with(pts, &small_params(), 1, 1).unwrap();
    let mut bytes = Vec::new();
    write_forest(&forest, &mut bytes).unwrap();
    assert_eq!(read_forest::<f32, _>(&mut bytes.as_slice()).unwrap(), forest);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_sets_are_covered_and_hits_are_near(
        n in 10usize..160,
        d in 2usize..7,
        spread in 0.5f64..30.0,
        seed in any::<u64>(),
    ) {
        let mut r = rng(seed);
        let pts: Vec<Point<f64>> = (0..n)
            .map(|k| Point { id: k as PointId, coords: (0..d).map(|_| r.random_range(-spread..spread)).collect() })
            .collect();
        let params = BuildParams { leaf_cutoff: 4, seed, ..BuildParams::default() };
        let forest = build_forest_with(pts.clone(), &params, 2, 1).unwrap();
        for tree in &forest.trees {
            prop_assert!(audit_tree(tree, n).missing.is_empty());
        }
        for k in 0..10 {
            let q: Vec<f64> = pts[k % n].coords.iter().map(|v| v + r.random_range(-0.5..0.5)).collect();
            if let Some(hit) = query_forest(&forest, &q).unwrap().hit {
                prop_assert!(dist(&pts[hit as usize].coords, &q) <= params.c * params.r);
            }
        }
        // The indexed point itself is always found.
        let exact = query_forest(&forest, &pts[0].coords).unwrap();
        prop_assert!(exact.hit.is_some());
    }
}
