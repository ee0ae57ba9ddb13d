//! Collision probabilities of the cap-carving partition.
//!
//! The estimators never materialize a partition. The cap capturing a point
//! is the first Gaussian `g` with `⟨u, g⟩ ≥ d^{1/4}`, so two points collide
//! iff the first `g` capturing either of them captures both. By rotation
//! invariance only the span of the points matters: a pair lives in a 2-D
//! subspace and a triple in a 3-D one, and `⟨u, g⟩` for `g ~ N(0, I_d)`
//! has the same law as for `g ~ N(0, I_3)` on the embedded coordinates.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{invalid, Error, Result};
use crate::parallel;

/// Empirical collision frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionEstimate {
    pub p_hat: f64,
    pub trials: u64,
    pub std_err: f64,
}

impl CollisionEstimate {
    pub fn from_counts(hits: u64, trials: u64) -> Self {
        let p_hat = if trials == 0 { 0.0 } else { hits as f64 / trials as f64 };
        let std_err = if trials == 0 { 0.0 } else { (p_hat * (1.0 - p_hat) / trials as f64).sqrt() };
        CollisionEstimate { p_hat, trials, std_err }
    }

    /// `−ln p̂` (infinite when nothing collided).
    pub fn log_inv(&self) -> f64 {
        -self.p_hat.ln()
    }
}

/// `τ²/(4 − τ²) · √d/2`.
pub fn predicted_log_inv_collision(tau: f64, d: usize) -> Result<f64> {
    if !(tau > 0.0 && tau < 2.0) {
        return Err(invalid(format!("tau must lie in (0, 2), got {tau}")));
    }
    Ok(tau * tau / (4.0 - tau * tau) * (d as f64).sqrt() / 2.0)
}

/// `Pr[R(u) = R(v)]` for `‖u − v‖ = tau` on `S^{d−1}` with unboundedly many
/// caps, evaluated numerically as `Pr[X ≥ t, Y ≥ t] / Pr[X ≥ t or Y ≥ t]`
/// for standard normals with correlation `1 − τ²/2` and `t = d^{1/4}`.
pub fn pair_collision_probability(tau: f64, d: usize) -> Result<f64> {
    if !(0.0..=2.0).contains(&tau) {
        return Err(invalid(format!("tau must lie in [0, 2], got {tau}")));
    }
    if d < 2 {
        return Err(invalid(format!("need d >= 2, got {d}")));
    }
    let t = (d as f64).powf(0.25);
    let rho = 1.0 - tau * tau / 2.0;
    let single = upper_tail(t);
    let both = joint_upper_tail(t, rho);
    Ok((both / (2.0 * single - both)).clamp(0.0, 1.0))
}

fn upper_tail(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// `Pr[X ≥ t, Y ≥ t]`: integrates `φ(x)·Pr[Y ≥ t | X = x]` over `x ≥ t`.
fn joint_upper_tail(t: f64, rho: f64) -> f64 {
    let s = (1.0 - rho * rho).max(0.0).sqrt();
    if s < 1e-9 {
        return if rho > 0.0 { upper_tail(t) } else { 0.0 };
    }
    let f = |x: f64| (-0.5 * x * x).exp() * upper_tail((t - rho * x) / s);
    const STEPS: usize = 4096;
    let h = 10.0 / STEPS as f64;
    let mut acc = f(t) + f(t + 10.0);
    for k in 1..STEPS {
        acc += f(t + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0 / (2.0 * std::f64::consts::PI).sqrt()
}

/// Estimates `Pr[R(u) = R(v)]` for `‖u − v‖ = tau` on `S^{d−1}`, using
/// [`parallel::declared_workers`] workers.
pub fn estimate_pair_collision(tau: f64, d: usize, trials: u64, seed: u64) -> Result<CollisionEstimate> {
    estimate_pair_collision_with(tau, d, trials, seed, parallel::declared_workers())
}

pub fn estimate_pair_collision_with(
    tau: f64,
    d: usize,
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<CollisionEstimate> {
    if !(0.0..2.0).contains(&tau) {
        return Err(invalid(format!("tau must lie in [0, 2), got {tau}")));
    }
    check_common(d, trials)?;
    let t = (d as f64).powf(0.25);
    let cos = 1.0 - tau * tau / 2.0;
    let sin = (1.0 - cos * cos).max(0.0).sqrt();
    let hits = parallel::split_trials(trials, seed, workers, |n, g| {
        let mut hits = 0;
        for _ in 0..n {
            loop {
                let g1: f64 = g.sample(StandardNormal);
                let g2: f64 = g.sample(StandardNormal);
                let x = g1;
                let y = cos * g1 + sin * g2;
                let (cu, cv) = (x >= t, y >= t);
                if cu || cv {
                    hits += u64::from(cu && cv);
                    break;
                }
            }
        }
        (hits, n)
    });
    Ok(CollisionEstimate::from_counts(hits.0, hits.1))
}

/// Estimates `Pr[R(u) = R(w) | R(u) = R(v)]` for unit vectors with the given
/// pairwise distances, using [`parallel::declared_workers`] workers.
///
/// `trials` counts accepted samples of the conditioning event. Each sample
/// carves caps until `u` or `v` is captured; it is accepted when both are,
/// and succeeds when `w` falls in that same cap (i.e. was not captured
/// earlier by a cap that missed `u` and `v`).
pub fn estimate_conditional_collision(
    tau_uv: f64,
    tau_uw: f64,
    tau_vw: f64,
    d: usize,
    trials: u64,
    seed: u64,
) -> Result<CollisionEstimate> {
    estimate_conditional_collision_with(tau_uv, tau_uw, tau_vw, d, trials, seed, parallel::declared_workers())
}

/// Raw attempts allowed per requested accepted sample.
const MAX_ATTEMPTS_PER_TRIAL: u64 = 100_000;

pub fn estimate_conditional_collision_with(
    tau_uv: f64,
    tau_uw: f64,
    tau_vw: f64,
    d: usize,
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<CollisionEstimate> {
    check_common(d, trials)?;
    let [u, v, w] = embed_triple(tau_uv, tau_uw, tau_vw)?;
    let t = (d as f64).powf(0.25);
    let proj = |a: &[f64; 3], g: &[f64; 3]| a[0] * g[0] + a[1] * g[1] + a[2] * g[2];
    let (hits, accepted) = parallel::split_trials(trials, seed, workers, |n, rg| {
        let (mut hits, mut accepted, mut attempts) = (0u64, 0u64, 0u64);
        let budget = n.saturating_mul(MAX_ATTEMPTS_PER_TRIAL);
        while accepted < n && attempts < budget {
            attempts += 1;
            let mut w_taken = false;
            loop {
                let g = [rg.sample(StandardNormal), rg.sample(StandardNormal), rg.sample(StandardNormal)];
                let (cu, cv, cw) = (proj(&u, &g) >= t, proj(&v, &g) >= t, proj(&w, &g) >= t);
                if cu || cv {
                    if cu && cv {
                        accepted += 1;
                        hits += u64::from(cw && !w_taken);
                    }
                    break;
                }
                w_taken |= cw;
            }
        }
        (hits, accepted)
    });
    if accepted == 0 {
        return Err(invalid("conditioning event R(u) = R(v) was never observed"));
    }
    Ok(CollisionEstimate::from_counts(hits, accepted))
}

fn check_common(d: usize, trials: u64) -> Result<()> {
    if d < 2 {
        return Err(invalid(format!("need d >= 2, got {d}")));
    }
    if trials == 0 {
        return Err(invalid("need at least one trial"));
    }
    Ok(())
}

/// Unit vectors in `ℝ³` with the given pairwise distances (Cholesky of the
/// Gram matrix).
pub(crate) fn embed_triple(tau_uv: f64, tau_uw: f64, tau_vw: f64) -> Result<[[f64; 3]; 3]> {
    for tau in [tau_uv, tau_uw, tau_vw] {
        if !(0.0..=2.0).contains(&tau) {
            return Err(Error::InfeasibleGram);
        }
    }
    let g = |tau: f64| 1.0 - tau * tau / 2.0;
    let (guv, guw, gvw) = (g(tau_uv), g(tau_uw), g(tau_vw));
    const EPS: f64 = 1e-9;
    let u = [1.0, 0.0, 0.0];
    let v1 = guv;
    let v2 = (1.0 - v1 * v1).max(0.0).sqrt();
    let w1 = guw;
    let w2 = if v2 > EPS { (gvw - v1 * w1) / v2 } else if (gvw - v1 * w1).abs() <= EPS { 0.0 } else { return Err(Error::InfeasibleGram) };
    let rest = 1.0 - w1 * w1 - w2 * w2;
    if rest < -EPS {
        return Err(Error::InfeasibleGram);
    }
    Ok([u, [v1, v2, 0.0], [w1, w2, rest.max(0.0).sqrt()]])
}
