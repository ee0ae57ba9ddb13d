//! The acceptance criteria, numbered 1–11. Each returns a [`Criterion`]
//! with a one-line verdict.

use std::time::Instant;

use anyhow::Result;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use sann_core::clustering::{find_dense_ball, find_dense_cap};
use sann_core::geometry::{bits_of_words, cap_to_enclosing_ball, dist, dot, hamming_embed, project_between_spheres, sq_dist, PointId};
use sann_core::index::{audit_tree, read_forest, write_forest};
use sann_core::rng::{self, rng, Rng};
use sann_core::{BuildParams, Forest, Point, SphereFrame};

use crate::experiments::{run_collision_suite, run_recall, run_vdc_suite, RecallOptions};
use crate::ingest::{build_index, query, Ingest, JlDim};
use crate::instance::gen_random_instance;
use crate::report::ExperimentReport;

#[derive(Debug, Clone, PartialEq)]
pub struct Criterion {
    pub id: u8,
    pub title: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl std::fmt::Display for Criterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "criterion {:>2} [{verdict}] {}: {}", self.id, self.title, self.detail)
    }
}

fn from_checks(id: u8, title: &'static str, rep: &ExperimentReport, prefix: &str) -> Criterion {
    let checks: Vec<_> = rep.checks.iter().filter(|c| c.name.starts_with(prefix)).collect();
    let pass = !checks.is_empty() && checks.iter().all(|c| c.pass);
    let detail = checks.iter().map(|c| format!("{} ({})", c.detail, c.name)).collect::<Vec<_>>().join("; ");
    Criterion { id, title, pass, detail }
}

/// Criteria 1–4 from one collision suite at `d = 100`, `10⁵` trials.
pub fn collision_criteria(seed: u64, workers: usize) -> Result<[Criterion; 4]> {
    let t = Instant::now();
    let rep = run_collision_suite(100, 100_000, seed, workers)?;
    Ok(collision_verdicts(&rep, t.elapsed().as_secs_f64()))
}

/// Criteria 1–4 read off a finished collision suite that took `secs`.
pub fn collision_verdicts(rep: &ExperimentReport, secs: f64) -> [Criterion; 4] {
    let mut out = [
        from_checks(1, "pairwise collision law", rep, "pair law"),
        from_checks(2, "three-point property", rep, "three-point"),
        from_checks(3, "monotonicity", rep, "pair monotone"),
        from_checks(4, "grid calibration", rep, "grid calibration"),
    ];
    out[0].detail.push_str(&format!("; suite took {secs:.1}s"));
    out[0].pass &= secs <= 300.0;
    out
}

/// `Project(R1, R2, r)` against points placed explicitly on two concentric
/// circles.
pub fn project_criterion() -> Criterion {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for a in 0..10 {
        for b in 0..10 {
            let (r1, r2) = (0.3 + 0.37 * a as f64, 0.2 + 0.41 * b as f64);
            let (lo, hi) = ((r1 - r2).abs(), r1 + r2);
            for k in 0..10 {
                let r = lo + (hi - lo) * (k as f64 + 0.5) / 10.0;
                let cos = (r1 * r1 + r2 * r2 - r * r) / (2.0 * r1 * r2);
                let sin = (1.0 - cos * cos).max(0.0).sqrt();
                let x = [r1, 0.0];
                let y = [r2 * cos, r2 * sin];
                let ny = (y[0] * y[0] + y[1] * y[1]).sqrt();
                let projected = [r1 * y[0] / ny, r1 * y[1] / ny];
                let expect = ((projected[0] - x[0]).powi(2) + (projected[1] - x[1]).powi(2)).sqrt();
                let got = project_between_spheres(r1, r2, r).unwrap_or(f64::NAN);
                worst = worst.max((got - expect).abs());
                if !(got - expect).abs().le(&1e-9) {
                    worst = f64::INFINITY;
                }
                cases += 1;
            }
        }
    }
    let mut identity = 0.0f64;
    for k in 1..=100 {
        let (big_r, r) = (0.05 * k as f64, 0.1 * k as f64 * 0.019);
        let got = project_between_spheres(big_r, big_r, r).unwrap_or(f64::NAN);
        identity = identity.max(((got - r) / r).abs());
        if got.is_nan() {
            identity = f64::INFINITY;
        }
    }
    Criterion {
        id: 5,
        title: "Project correctness",
        pass: worst <= 1e-9 && identity <= 4.0 * f64::EPSILON,
        detail: format!("{cases} cases, max |err| {worst:.2e}; Project(R,R,r) max rel err {identity:.2e}"),
    }
}

fn unit(d: usize, g: &mut Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(g)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// Random caps, each enclosed by `cap_to_enclosing_ball` and probed with
/// sampled cap points.
pub fn shrinkage_criterion(seed: u64) -> Criterion {
    const D: usize = 8;
    let mut g = rng(seed);
    let (mut outside, mut bad_radius, mut worst_ratio, mut errors) = (0u64, 0u64, 0.0f64, 0u64);
    for _ in 0..1000 {
        let big_r = g.random_range(0.5..3.0);
        let o: Vec<f64> = (0..D).map(|_| g.random_range(-5.0..5.0)).collect();
        let axis = unit(D, &mut g);
        let x: Vec<f64> = o.iter().zip(&axis).map(|(o, a)| o + big_r * a).collect();
        let rho = g.random_range(1e-3..std::f64::consts::SQRT_2);
        let frame = SphereFrame::new(o.clone(), big_r).expect("positive radius");
        let ball = match cap_to_enclosing_ball(&frame, &Point { id: 0, coords: x }, rho * big_r) {
            Ok(b) => b,
            Err(_) => {
                errors += 1;
                continue;
            }
        };
        let eta = (2.0 - rho * rho) / 2.0;
        let ratio = ball.radius / big_r;
        worst_ratio = worst_ratio.max(ratio);
        if ratio > (1.0 - eta * eta).sqrt() + 1e-9 || ratio >= 1.0 {
            bad_radius += 1;
        }
        for s in 0..10_000 {
            let a = if s % 10 == 0 { eta } else { g.random_range(eta..=1.0) };
            let w = unit(D, &mut g);
            let along = dot(&w, &axis);
            let perp: Vec<f64> = w.iter().zip(&axis).map(|(w, a)| w - along * a).collect();
            let pn = perp.iter().map(|v| v * v).sum::<f64>().sqrt();
            let b = (1.0 - a * a).max(0.0).sqrt();
            let p: Vec<f64> = (0..D).map(|k| o[k] + big_r * (a * axis[k] + b * perp[k] / pn)).collect();
            if !ball.contains(&p, 1e-9) {
                outside += 1;
            }
        }
    }
    Criterion {
        id: 6,
        title: "shrinkage",
        pass: outside == 0 && bad_radius == 0 && errors == 0,
        detail: format!(
            "1000 caps x 10^4 points: {outside} outside, {bad_radius} radius violations, {errors} errors, max radius/R {worst_ratio:.6}"
        ),
    }
}

pub fn vdc_criterion(seed: u64) -> Result<Criterion> {
    let rep = run_vdc_suite(100, 256, &[0.1, 0.2, 0.4], seed)?;
    Ok(from_checks(7, "van der Corput consequence", &rep, "vdc"))
}

/// Densest data-point-centered ball by direct all-pairs counting.
fn oracle(points: &[Point], radius: f64) -> (PointId, Vec<PointId>) {
    let mut best: Option<(usize, PointId, Vec<PointId>)> = None;
    for p in points {
        let members: Vec<PointId> = points.iter().filter(|q| dist(&p.coords, &q.coords) <= radius).map(|q| q.id).collect();
        let better = match &best {
            None => true,
            Some((count, id, _)) => members.len() > *count || (members.len() == *count && p.id < *id),
        };
        if better {
            best = Some((members.len(), p.id, members));
        }
    }
    let (_, id, mut members) = best.expect("non-empty instance");
    members.sort_unstable();
    (id, members)
}

pub fn clustering_criterion(seed: u64) -> Criterion {
    const N: usize = 200;
    const D: usize = 10;
    let mut mismatches = Vec::new();
    for inst in 0..50u64 {
        let mut g = rng(rng::derive(seed, inst));
        let on_sphere = inst % 2 == 1;
        let points: Vec<Point> = (0..N)
            .map(|k| {
                let coords = if on_sphere {
                    unit(D, &mut g).into_iter().map(|v| 2.0 * v).collect()
                } else {
                    let c = (k % 5) as f64;
                    (0..D).map(|_| c + 0.7 * Distribution::<f64>::sample(&StandardNormal, &mut g)).collect()
                };
                Point { id: k as PointId, coords }
            })
            .collect();
        let radius = if on_sphere { g.random_range(1.0..2.2) } else { g.random_range(1.0..4.0) };
        let expect = oracle(&points, radius);
        let got = if on_sphere {
            let frame = SphereFrame::new(vec![0.0; D], 2.0).expect("positive radius");
            find_dense_cap(&points, &frame, radius, 1)
        } else {
            find_dense_ball(&points, radius, 1)
        };
        match got {
            Ok(Some(c)) if c.center_id == expect.0 && c.members == expect.1 => {}
            other => mismatches.push(format!("instance {inst}: {:?}", other.map(|c| c.map(|c| c.center_id)))),
        }
    }
    Criterion {
        id: 8,
        title: "clustering oracle equivalence",
        pass: mismatches.is_empty(),
        detail: if mismatches.is_empty() {
            "50 instances of 200 points (25 balls, 25 caps) match the all-pairs oracle".into()
        } else {
            mismatches.join("; ")
        },
    }
}

/// `n = 2000`, `d = 256`, 200 queries, forest prefixes of 12 and 48 trees.
pub fn recall_criterion(seed: u64, workers: usize) -> Result<(Criterion, ExperimentReport)> {
    let t = Instant::now();
    let inst = gen_random_instance(2000, 256, 2.0, 1.0, 200, seed)?;
    let params = BuildParams { c: 2.0, r: 1.0, seed, ..BuildParams::default() };
    let opts = RecallOptions { tree_counts: vec![12, 48], jl: JlDim::Auto, workers };
    let rep = run_recall(&inst, &params, &opts)?;
    let secs = t.elapsed().as_secs_f64();
    let m = &rep.metrics;
    let (r12, r48) = (m["recall@12"], m["recall@48"]);
    let (c12, c48) = (m["mean_candidates@12"], m["mean_candidates@48"]);
    let cap = 0.2 * 2000.0;
    let pass = r12 >= 0.80 && r48 >= 0.95 && c12 <= cap && c48 <= cap && secs <= 600.0;
    let detail = format!(
        "recall@12 {r12:.3} (>= 0.80), recall@48 {r48:.3} (>= 0.95), mean candidates {c12:.1}/{c48:.1} (<= {cap}), \
         unfiltered recall {:.3}/{:.3}, {secs:.1}s total",
        m["recall_unfiltered@12"], m["recall_unfiltered@48"]
    );
    Ok((Criterion { id: 9, title: "end-to-end recall", pass, detail }, rep))
}

fn round_trip(forest: &Forest) -> Result<bool> {
    let mut bytes = Vec::new();
    write_forest(forest, &mut bytes)?;
    let back: Forest = read_forest(&mut bytes.as_slice())?;
    let mut again = Vec::new();
    write_forest(&back, &mut again)?;
    Ok(back == *forest && again == bytes)
}

pub fn structural_criterion(seed: u64) -> Result<Criterion> {
    let inst = gen_random_instance(1500, 128, 2.0, 1.0, 60, seed)?;
    let data: Vec<Vec<f64>> = inst.points.iter().map(|p| p.coords.clone()).collect();
    let params = BuildParams { seed, ..BuildParams::default() };
    let forest = build_index(&data, &params, 4, JlDim::Auto, 1)?;
    let mut missing = 0;
    let mut depth = 0;
    let (mut literal, mut slack) = (0, 0);
    for tree in &forest.trees {
        let a = audit_tree(tree, forest.len());
        missing += a.missing.len();
        depth = depth.max(a.ball_depth_max);
        literal += a.gap_ratio_violations;
        slack += a.gap_ratio_slack_violations;
    }
    let serial = round_trip(&forest)?;

    let small = gen_random_instance(500, 64, 2.0, 1.0, 40, seed)?;
    let opts = RecallOptions { tree_counts: vec![2, 8], jl: JlDim::Auto, workers: 1 };
    let recall_same = run_recall(&small, &params, &opts)?.deterministic_view()
        == run_recall(&small, &params, &opts)?.deterministic_view();
    let collide_same = run_collision_suite(32, 2000, seed, 1)?.deterministic_view()
        == run_collision_suite(32, 2000, seed, 1)?.deterministic_view();
    let vdc_same = run_vdc_suite(5, 64, &[0.2], seed)? == run_vdc_suite(5, 64, &[0.2], seed)?;
    let deterministic = recall_same && collide_same && vdc_same;

    let max = params.max_ball_depth;
    Ok(Criterion {
        id: 10,
        title: "structural invariants",
        pass: missing == 0 && depth <= max && slack == 0 && serial && deterministic,
        detail: format!(
            "4 trees over 1500 points: {missing} uncovered ids, ball depth {depth} (<= {max}), \
             gap-ratio violations {slack} ({literal} without the 2δ rounding slack), \
             serialization round-trip {serial}, reports deterministic {deterministic}"
        ),
    })
}

/// Random 64-bit words embedded as 0/1 points and indexed with thresholds
/// `(√r, √(c·r))`.
pub fn hamming_criterion(seed: u64) -> Result<Criterion> {
    const N: usize = 500;
    let (r_h, c_h) = (8u32, 2.0f64);
    let mut g = rng(seed);
    let words: Vec<u64> = (0..N).map(|_| g.random()).collect();
    let points: Vec<Point> = words.iter().enumerate().map(|(k, &w)| hamming_embed(k as PointId, &bits_of_words(&[w]))).collect();
    let mut exact = true;
    for i in 0..N {
        for j in i + 1..N {
            exact &= sq_dist(&points[i].coords, &points[j].coords) == f64::from((words[i] ^ words[j]).count_ones());
        }
    }

    let r = f64::from(r_h).sqrt();
    let params = BuildParams { c: c_h.sqrt(), r, delta: 0.05 * r, seed, ..BuildParams::default() };
    let data: Vec<Vec<f64>> = points.iter().map(|p| p.coords.clone()).collect();
    let forest = build_index(&data, &params, 8, JlDim::Off, 1)?;
    let ingest = Ingest::from_meta(&forest.meta)?;
    let limit = (c_h * f64::from(r_h)) as u32;
    let (mut answered, mut far) = (0, 0);
    for _ in 0..200 {
        let base = words[g.random_range(0..N)];
        let flips = g.random_range(0..=r_h);
        let mut q = base;
        for _ in 0..flips {
            q ^= 1u64 << g.random_range(0..64);
        }
        let qp = hamming_embed(0, &bits_of_words(&[q]));
        if let Some(id) = query(&forest, &ingest, &qp.coords, forest.trees.len(), false)?.hit {
            answered += 1;
            far += u32::from((words[id as usize] ^ q).count_ones() > limit);
        }
    }
    Ok(Criterion {
        id: 11,
        title: "Hamming reduction",
        pass: exact && far == 0,
        detail: format!(
            "squared distances equal Hamming distances: {exact}; 200 queries, {answered} answered, {far} beyond Hamming {limit}"
        ),
    })
}

/// The criteria `selftest` runs by default.
pub const SELFTEST: [u8; 6] = [5, 6, 7, 8, 10, 11];

/// Runs the criteria in `ids`, in order.
pub fn run(ids: &[u8], seed: u64, workers: usize) -> Result<Vec<Criterion>> {
    let mut out = Vec::new();
    if ids.iter().any(|id| (1..=4).contains(id)) {
        out.extend(collision_criteria(seed, workers)?.into_iter().filter(|c| ids.contains(&c.id)));
    }
    for &id in ids {
        match id {
            1..=4 => {}
            5 => out.push(project_criterion()),
            6 => out.push(shrinkage_criterion(seed)),
            7 => out.push(vdc_criterion(seed)?),
            8 => out.push(clustering_criterion(seed)),
            9 => out.push(recall_criterion(seed, workers)?.0),
            10 => out.push(structural_criterion(seed)?),
            11 => out.push(hamming_criterion(seed)?),
            other => anyhow::bail!("no criterion {other}"),
        }
    }
    out.sort_by_key(|c| c.id);
    Ok(out)
}
