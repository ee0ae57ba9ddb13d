//! Recall benchmarks, collision-probability tables and the van der Corput
//! suite.

use std::time::Instant;

use anyhow::{ensure, Result};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use sann_core::clustering::vdc_best_center;
use sann_core::euclidean_lsh::estimate_grid_collision_with;
use sann_core::geometry::{dist, dot, PointId};
use sann_core::index::audit_tree;
use sann_core::rng::{self, rng};
use sann_core::spherical_lsh::{
    estimate_conditional_collision_with, estimate_pair_collision_with, pair_collision_probability,
    predicted_log_inv_collision, CollisionEstimate,
};
use sann_core::{parallel, BuildParams, Point};
use serde::{Deserialize, Serialize};

use crate::ingest::{build_index, query, Ingest, JlDim};
use crate::instance::{brute_force_near, RandomInstance};
use crate::report::{fmt, ExperimentReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallOptions {
    /// Tree-count prefixes to evaluate; the forest is built once with the
    /// largest.
    pub tree_counts: Vec<usize>,
    pub jl: JlDim,
    pub workers: usize,
}

impl Default for RecallOptions {
    fn default() -> Self {
        RecallOptions { tree_counts: vec![12], jl: JlDim::Auto, workers: parallel::declared_workers() }
    }
}

struct QueryRow {
    truth: Option<(PointId, f64)>,
    per_k: Vec<PrefixResult>,
}

struct PrefixResult {
    hit: Option<(PointId, f64)>,
    unfiltered_ok: bool,
    candidates: u64,
    nodes: u64,
    distances: u64,
}

/// Builds a forest over `inst` and measures recall for each tree-count
/// prefix. A query counts as answered when a point within `c·r` in the
/// original space is returned; queries without a true `r`-near neighbor are
/// left out. Unfiltered recall takes the first hit in the indexed space
/// without the original-space check.
pub fn run_recall(inst: &RandomInstance, params: &BuildParams, opts: &RecallOptions) -> Result<ExperimentReport> {
    let max_trees = opts.tree_counts.iter().copied().max().unwrap_or(0);
    ensure!(max_trees > 0, "need at least one tree count");
    let data: Vec<Vec<f64>> = inst.points.iter().map(|p| p.coords.clone()).collect();
    let start = Instant::now();
    let forest = build_index(&data, params, max_trees, opts.jl, opts.workers)?;
    let build_seconds = start.elapsed().as_secs_f64();
    let ingest = Ingest::from_meta(&forest.meta)?;
    let limit = params.c * params.r;

    let mut rep = ExperimentReport::new(
        format!("recall-n{}-d{}-seed{}", inst.points.len(), inst.dim(), params.seed),
        serde_json::json!({ "build": params, "options": opts, "instance_seed": inst.seed }),
        &[
            "query", "planted", "truth_id", "truth_dist", "trees", "hit", "hit_dist", "unfiltered_ok", "candidates",
            "nodes", "distance_computations",
        ],
    );
    rep.timings.insert("build_seconds".into(), build_seconds);

    let mut query_seconds = vec![0.0; opts.tree_counts.len()];
    let rows: Vec<Result<(QueryRow, Vec<f64>)>> = parallel::map_ordered(&inst.queries, opts.workers, |_, (q, _)| {
        let truth = brute_force_near(&inst.points, q, params.r).map(|p| (p.id, dist(&p.coords, q)));
        let mut per_k = Vec::new();
        let mut secs = Vec::new();
        for &k in &opts.tree_counts {
            let t = Instant::now();
            let out = query(&forest, &ingest, q, k, true)?;
            secs.push(t.elapsed().as_secs_f64());
            let raw = query(&forest, &ingest, q, k, false)?;
            let orig = |id: PointId| dist(&inst.points[id as usize].coords, q);
            per_k.push(PrefixResult {
                hit: out.hit.map(|id| (id, orig(id))),
                unfiltered_ok: raw.hit.is_some_and(|id| orig(id) <= limit),
                candidates: out.stats.candidates_examined,
                nodes: out.stats.nodes_visited,
                distances: out.stats.distance_computations,
            });
        }
        Ok((QueryRow { truth, per_k }, secs))
    });

    let mut with_truth = 0u64;
    let mut hits = vec![0u64; opts.tree_counts.len()];
    let mut raw_hits = vec![0u64; opts.tree_counts.len()];
    let mut cand = vec![0u64; opts.tree_counts.len()];
    let mut nodes = vec![0u64; opts.tree_counts.len()];
    let mut dists = vec![0u64; opts.tree_counts.len()];
    for (qi, row) in rows.into_iter().enumerate() {
        let (row, secs) = row?;
        let planted = inst.queries[qi].1;
        if row.truth.is_some() {
            with_truth += 1;
        }
        for (slot, (res, &k)) in row.per_k.iter().zip(&opts.tree_counts).enumerate() {
            query_seconds[slot] += secs[slot];
            if row.truth.is_some() {
                hits[slot] += u64::from(res.hit.is_some());
                raw_hits[slot] += u64::from(res.unfiltered_ok);
                cand[slot] += res.candidates;
                nodes[slot] += res.nodes;
                dists[slot] += res.distances;
            }
            let opt_id = |x: Option<(PointId, f64)>| x.map_or(String::new(), |(id, _)| id.to_string());
            let opt_d = |x: Option<(PointId, f64)>| x.map_or(String::new(), |(_, d)| fmt(d));
            rep.row(vec![
                qi.to_string(),
                planted.to_string(),
                opt_id(row.truth),
                opt_d(row.truth),
                k.to_string(),
                opt_id(res.hit),
                opt_d(res.hit),
                res.unfiltered_ok.to_string(),
                res.candidates.to_string(),
                res.nodes.to_string(),
                res.distances.to_string(),
            ]);
        }
    }

    let n = inst.points.len() as f64;
    let denom = with_truth.max(1) as f64;
    rep.metric("n", n);
    rep.metric("dim", inst.dim() as f64);
    rep.metric("indexed_dim", ingest.target_dim() as f64);
    rep.metric("scale", ingest.scale);
    rep.metric("queries", inst.queries.len() as f64);
    rep.metric("queries_with_truth", with_truth as f64);
    for (slot, &k) in opts.tree_counts.iter().enumerate() {
        let mean_cand = cand[slot] as f64 / denom;
        rep.metric(format!("recall@{k}"), hits[slot] as f64 / denom);
        rep.metric(format!("recall_unfiltered@{k}"), raw_hits[slot] as f64 / denom);
        rep.metric(format!("mean_candidates@{k}"), mean_cand);
        rep.metric(format!("mean_nodes_visited@{k}"), nodes[slot] as f64 / denom);
        rep.metric(format!("mean_distance_computations@{k}"), dists[slot] as f64 / denom);
        rep.metric(format!("candidate_exponent@{k}"), mean_cand.max(1.0).ln() / n.ln());
        rep.timings.insert(format!("query_us@{k}"), 1e6 * query_seconds[slot] / inst.queries.len().max(1) as f64);
    }
    let audits: Vec<_> = forest.trees.iter().map(|t| audit_tree(t, forest.len())).collect();
    let refs: u64 = audits.iter().map(|a| a.stored_references).sum();
    rep.metric("mean_stored_references_per_point", refs as f64 / (n * audits.len() as f64));
    rep.metric("max_ball_depth", audits.iter().map(|a| a.ball_depth_max).max().unwrap_or(0) as f64);
    rep.metric("mean_tree_nodes", audits.iter().map(|a| a.nodes as f64).sum::<f64>() / audits.len() as f64);
    rep.metric("rho", 1.0 / (2.0 * params.c * params.c - 1.0));
    for (slot, &k) in opts.tree_counts.iter().enumerate() {
        let r = hits[slot] as f64 / denom;
        rep.check(format!("recall@{k} in [0, 1]"), (0.0..=1.0).contains(&r), fmt(r));
    }
    Ok(rep)
}

pub const PAIR_TAUS: [f64; 8] = [0.25, 0.5, 0.75, 1.0, 1.25, 1.414, 1.5, 1.75];
/// The τ values held to the collision law.
pub const LAW_TAUS: [f64; 3] = [0.5, 1.0, 1.414];
pub const GRID_TAUS: [f64; 3] = [0.05, 0.1, 0.2];
pub const TRIPLE: (f64, f64, f64) = (1.0, std::f64::consts::SQRT_2, std::f64::consts::SQRT_2);

fn ln_inv(e: &CollisionEstimate) -> f64 {
    e.log_inv()
}

/// Pair estimates over [`PAIR_TAUS`] (all from one seed, so the draws are
/// shared), the conditional estimate at [`TRIPLE`] with `trials / 5`
/// accepted samples, and grid estimates over [`GRID_TAUS`].
pub fn run_collision_suite(d: usize, trials: u64, seed: u64, workers: usize) -> Result<ExperimentReport> {
    let mut rep = ExperimentReport::new(
        format!("collisions-d{d}-seed{seed}"),
        serde_json::json!({ "d": d, "trials": trials, "seed": seed, "workers": workers }),
        &["family", "tau_uv", "tau_uw", "tau_vw", "d", "p_hat", "std_err", "predicted_ln_inv", "ln_inv_hat", "exact_ln_inv"],
    );
    let t0 = Instant::now();

    let pair_seed = rng::derive(seed, 1);
    let mut pairs = Vec::new();
    for &tau in &PAIR_TAUS {
        let e = estimate_pair_collision_with(tau, d, trials, pair_seed, workers)?;
        let predicted = predicted_log_inv_collision(tau, d)?;
        let exact = -pair_collision_probability(tau, d)?.ln();
        rep.row(vec![
            "spherical_pair".into(),
            fmt(tau),
            String::new(),
            String::new(),
            d.to_string(),
            fmt(e.p_hat),
            fmt(e.std_err),
            fmt(predicted),
            fmt(ln_inv(&e)),
            fmt(exact),
        ]);
        if LAW_TAUS.contains(&tau) {
            let tol = (0.35 * predicted).max(3.0 * e.std_err / e.p_hat);
            let gap = (ln_inv(&e) - predicted).abs();
            rep.check(
                format!("pair law tau={tau}"),
                gap <= tol,
                format!("-ln p = {:.4}, predicted {predicted:.4}, |diff| {gap:.4} vs tol {tol:.4}, exact {exact:.4}", ln_inv(&e)),
            );
        }
        pairs.push((tau, e));
    }
    let mut inversions = Vec::new();
    for w in pairs.windows(2) {
        let ((ta, a), (tb, b)) = (&w[0], &w[1]);
        if b.p_hat - a.p_hat > 2.0 * a.std_err.max(b.std_err) {
            inversions.push(format!("{ta}->{tb}"));
        }
    }
    rep.metric("pair_inversions", inversions.len() as f64);
    rep.check("pair monotone", inversions.is_empty(), format!("inversions: {inversions:?}"));

    let (uv, uw, vw) = TRIPLE;
    let cond_trials = (trials / 5).max(1);
    let e = estimate_conditional_collision_with(uv, uw, vw, d, cond_trials, rng::derive(seed, 2), workers)?;
    let naive = predicted_log_inv_collision(uw, d)? - predicted_log_inv_collision(uv, d)?;
    rep.row(vec![
        "spherical_conditional".into(),
        fmt(uv),
        fmt(uw),
        fmt(vw),
        d.to_string(),
        fmt(e.p_hat),
        fmt(e.std_err),
        fmt(naive),
        fmt(ln_inv(&e)),
        String::new(),
    ]);
    rep.metric("conditional_ln_inv", ln_inv(&e));
    rep.check(
        "three-point property",
        ln_inv(&e) >= 4.0 && ln_inv(&e) >= naive + 0.3,
        format!("-ln p = {:.4} from {} accepted samples, naive bound {naive:.4}", ln_inv(&e), e.trials),
    );

    let grid_seed = rng::derive(seed, 3);
    let mut prev: Option<f64> = None;
    let mut grid_monotone = true;
    for &tau in &GRID_TAUS {
        let e = estimate_grid_collision_with(tau, d, trials, grid_seed, workers)?;
        let predicted = tau * (d as f64).sqrt();
        let ratio = ln_inv(&e) / predicted;
        rep.row(vec![
            "grid_pair".into(),
            fmt(tau),
            String::new(),
            String::new(),
            d.to_string(),
            fmt(e.p_hat),
            fmt(e.std_err),
            fmt(predicted),
            fmt(ln_inv(&e)),
            String::new(),
        ]);
        rep.check(
            format!("grid calibration tau={tau}"),
            (0.7..=1.4).contains(&ratio),
            format!("-ln p / (tau sqrt d) = {ratio:.4}"),
        );
        grid_monotone &= prev.is_none_or(|p| e.p_hat <= p);
        prev = Some(e.p_hat);
    }
    rep.check("grid monotone", grid_monotone, "coupled draws");
    rep.timings.insert("seconds".into(), t0.elapsed().as_secs_f64());
    Ok(rep)
}

/// Unit vectors in the cap `{u : ‖u − u*‖ ≤ √2 − ε}` around a random `u*`,
/// with inner products biased toward the cap boundary.
pub fn covered_set(n: usize, d: usize, eps: f64, seed: u64) -> Vec<Point> {
    let mut g = rng(seed);
    let unit = |g: &mut rng::Rng| -> Vec<f64> {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(g)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / n).collect()
    };
    let star = unit(&mut g);
    let chord = std::f64::consts::SQRT_2 - eps;
    let a_min = 1.0 - chord * chord / 2.0;
    (0..n)
        .map(|k| {
            let w = unit(&mut g);
            let along = dot(&w, &star);
            let perp: Vec<f64> = w.iter().zip(&star).map(|(w, s)| w - along * s).collect();
            let pn = perp.iter().map(|x| x * x).sum::<f64>().sqrt();
            let u: f64 = g.random();
            let a = (a_min + (1.0 - a_min) * u * u * u).min(1.0);
            let b = (1.0 - a * a).sqrt();
            let coords = star.iter().zip(&perp).map(|(s, p)| a * s + b * p / pn).collect();
            Point { id: k as PointId, coords }
        })
        .collect()
}

/// For each ε and each of `n_sets` covered sets, checks that the van der
/// Corput center `u₀` has at least `ε²n/2` points with `⟨u₀, u⟩ ≥ ε²/2`.
pub fn run_vdc_suite(n_sets: usize, set_size: usize, eps_grid: &[f64], seed: u64) -> Result<ExperimentReport> {
    const DIM: usize = 32;
    let mut rep = ExperimentReport::new(
        format!("vdc-{n_sets}x{set_size}-seed{seed}"),
        serde_json::json!({ "sets": n_sets, "size": set_size, "eps": eps_grid, "seed": seed, "dim": DIM }),
        &["eps", "set", "center_id", "score", "count", "bound", "ratio"],
    );
    let mut violations = 0u64;
    let mut worst = f64::INFINITY;
    for (ei, &eps) in eps_grid.iter().enumerate() {
        ensure!(eps > 0.0 && eps <= 0.5, "eps must lie in (0, 0.5]");
        for s in 0..n_sets {
            let pts = covered_set(set_size, DIM, eps, rng::derive_all(seed, &[ei as u64, s as u64]));
            let (center, score) = vdc_best_center(&pts)?;
            let u0 = &pts[center as usize].coords;
            let count = pts.iter().filter(|p| dot(u0, &p.coords) >= eps * eps / 2.0).count();
            let bound = eps * eps * set_size as f64 / 2.0;
            let ratio = count as f64 / bound;
            violations += u64::from((count as f64) < bound);
            worst = worst.min(ratio);
            rep.row(vec![fmt(eps), s.to_string(), center.to_string(), fmt(score), count.to_string(), fmt(bound), fmt(ratio)]);
        }
    }
    rep.metric("violations", violations as f64);
    rep.metric("worst_ratio", worst);
    rep.check("vdc guarantee", violations == 0, format!("{violations} violations, worst ratio {worst:.3}"));
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::gen_random_instance;

    #[test]
    fn covered_sets_are_covered() {
        for eps in [0.1, 0.4] {
            let pts = covered_set(200, 16, eps, 9);
            let star_ok = pts.iter().all(|p| (dot(&p.coords, &p.coords) - 1.0).abs() < 1e-9);
            assert!(star_ok);
            let (c, _) = vdc_best_center(&pts).unwrap();
            assert!((c as usize) < pts.len());
        }
    }

    #[test]
    fn vdc_on_identical_points() {
        let p = Point { id: 0, coords: vec![1.0, 0.0, 0.0] };
        let pts: Vec<Point> = (0..10).map(|k| Point { id: k, ..p.clone() }).collect();
        let (c, score) = vdc_best_center(&pts).unwrap();
        assert_eq!(c, 0);
        assert_eq!(score, 10.0);
    }

    #[test]
    fn vdc_suite_shape() {
        let rep = run_vdc_suite(3, 64, &[0.2, 0.4], 1).unwrap();
        assert_eq!(rep.rows.len(), 6);
        assert!(rep.metrics.contains_key("worst_ratio"));
        assert!(rep.passed());
    }

    #[test]
    fn collision_suite_shape() {
        let rep = run_collision_suite(16, 2000, 3, 1).unwrap();
        assert_eq!(rep.rows.len(), PAIR_TAUS.len() + 1 + GRID_TAUS.len());
        for (row, &tau) in rep.rows.iter().zip(&PAIR_TAUS) {
            assert_eq!(row[7], fmt(predicted_log_inv_collision(tau, 16).unwrap()));
        }
    }

    #[test]
    fn huge_radius_gives_full_recall() {
        // Sphere radius √2, so every point is within c·r = 4 of every query.
        let inst = gen_random_instance(300, 32, 2.0, 1.0, 30, 7).unwrap();
        let params = BuildParams { c: 2.0, r: 2.0, delta: 0.1, ..BuildParams::default() };
        let opts = RecallOptions { tree_counts: vec![1], jl: JlDim::Off, workers: 1 };
        let rep = run_recall(&inst, &params, &opts).unwrap();
        assert_eq!(rep.metrics["recall@1"], 1.0);
    }

    #[test]
    fn more_trees_do_not_hurt_and_reports_repeat() {
        let inst = gen_random_instance(400, 64, 2.0, 1.0, 40, 8).unwrap();
        let params = BuildParams::default();
        let opts = RecallOptions { tree_counts: vec![2, 16], jl: JlDim::Auto, workers: 1 };
        let a = run_recall(&inst, &params, &opts).unwrap();
        assert!(a.metrics["recall@16"] >= a.metrics["recall@2"]);
        let b = run_recall(&inst, &params, &opts).unwrap();
        assert_eq!(a.deterministic_view(), b.deterministic_view());
        assert_eq!(a.rows.len(), 80);
    }
}
