use super::{check_dims, sq_dist, Ball, Point};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_SEB_TOL: f64 = 1e-6;
const MAX_ITERATIONS: usize = 100_000;
const RECENTER_EVERY: usize = 64;

/// Approximate smallest enclosing ball: radius ≤ (1+tol)·optimal.
///
/// The returned radius is the largest distance from the returned center to
/// an input point, so containment holds exactly.
pub fn smallest_enclosing_ball<T: Scalar>(points: &[Point<T>], tol: f64) -> Result<Ball<T>> {
    let refs: Vec<&[T]> = points.iter().map(|p| p.coords.as_slice()).collect();
    smallest_enclosing_ball_of(&refs, tol)
}

/// [`smallest_enclosing_ball`] over raw coordinate slices.
///
/// Frank–Wolfe with away steps on the dual `max_u Σ uᵢ‖pᵢ − c(u)‖²`,
/// `c(u) = Σ uᵢpᵢ`; stops once every point is within `(1+tol)` of `√Φ(u)`.
pub fn smallest_enclosing_ball_of<T: Scalar>(points: &[&[T]], tol: f64) -> Result<Ball<T>> {
    let Some(first) = points.first() else {
        return Err(Error::Empty("smallest enclosing ball of no points"));
    };
    if !(tol > 0.0) {
        return Err(crate::error::invalid(format!("seb tolerance must be positive, got {tol}")));
    }
    let d = first.len();
    for p in points {
        check_dims(d, p.len())?;
    }
    let pts: Vec<Vec<f64>> = points.iter().map(|p| p.iter().map(|v| v.as_f64()).collect()).collect();
    let sq_norms: Vec<f64> = pts.iter().map(|p| p.iter().map(|v| v * v).sum()).collect();

    let farthest = |from: &[f64]| -> (usize, f64) {
        let mut best = (0, -1.0);
        for (i, p) in pts.iter().enumerate() {
            let dd = sq_dist(p, from);
            if dd > best.1 {
                best = (i, dd);
            }
        }
        best
    };
    let (a, _) = farthest(&pts[0]);
    let (b, spread) = farthest(&pts[a]);
    let n = pts.len();
    let mut u = vec![0.0; n];
    let mut center = vec![0.0; d];
    if spread > 0.0 {
        u[a] = 0.5;
        u[b] = 0.5;
        recenter(&pts, &u, &mut center);
        let limit = (1.0 + tol) * (1.0 + tol);
        let mut dists = vec![0.0; n];
        for it in 0..MAX_ITERATIONS {
            if it % RECENTER_EVERY == RECENTER_EVERY - 1 {
                recenter(&pts, &u, &mut center);
            }
            let c_sq: f64 = center.iter().map(|v| v * v).sum();
            let phi = u.iter().zip(&sq_norms).map(|(w, s)| w * s).sum::<f64>() - c_sq;
            let (mut j, mut k) = (0, usize::MAX);
            for (i, p) in pts.iter().enumerate() {
                dists[i] = sq_dist(p, &center);
                if dists[i] > dists[j] {
                    j = i;
                }
                if u[i] > 0.0 && (k == usize::MAX || dists[i] < dists[k]) {
                    k = i;
                }
            }
            if !(phi > 0.0) || dists[j] <= limit * phi {
                break;
            }
            let up = dists[j] / phi - 1.0;
            let down = 1.0 - dists[k] / phi;
            if up >= down {
                let lambda = up / (2.0 * (1.0 + up));
                for w in u.iter_mut() {
                    *w *= 1.0 - lambda;
                }
                u[j] += lambda;
                for (c, &x) in center.iter_mut().zip(&pts[j]) {
                    *c = (1.0 - lambda) * *c + lambda * x;
                }
            } else {
                let uk = u[k];
                if uk >= 1.0 {
                    break;
                }
                let lambda = (down / (2.0 * (1.0 - down))).min(uk / (1.0 - uk));
                for w in u.iter_mut() {
                    *w *= 1.0 + lambda;
                }
                u[k] -= lambda;
                if u[k] <= uk * 1e-12 {
                    u[k] = 0.0;
                }
                for (c, &x) in center.iter_mut().zip(&pts[k]) {
                    *c = (1.0 + lambda) * *c - lambda * x;
                }
            }
        }
    } else {
        center.clone_from(&pts[0]);
    }

    let center: Vec<T> = center.into_iter().map(T::of).collect();
    let radius = points
        .iter()
        .map(|p| sq_dist(p, &center))
        .fold(T::zero(), |m, v| if v > m { v } else { m })
        .sqrt();
    Ok(Ball { center, radius })
}

fn recenter(pts: &[Vec<f64>], u: &[f64], center: &mut [f64]) {
    center.iter_mut().for_each(|c| *c = 0.0);
    let total: f64 = u.iter().sum();
    for (p, &w) in pts.iter().zip(u) {
        if w > 0.0 {
            for (c, &x) in center.iter_mut().zip(p) {
                *c += w / total * x;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::dist;
    use crate::rng;
    use approx::assert_relative_eq;
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn pt(c: &[f64]) -> Point<f64> {
        Point::new(0, c.to_vec()).unwrap()
    }

    fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
        [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
    }
    fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
        a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
    }
    fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
        [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
    }
    fn solve3(m: [[f64; 3]; 3], rhs: [f64; 3]) -> Option<[f64; 3]> {
        let det = dot3(m[0], cross(m[1], m[2]));
        if det.abs() < 1e-12 {
            return None;
        }
        let col = |k: usize| -> [[f64; 3]; 3] {
            let mut c = m;
            for (row, &r) in c.iter_mut().zip(&rhs) {
                row[k] = r;
            }
            c
        };
        let mut out = [0.0; 3];
        for (k, o) in out.iter_mut().enumerate() {
            let c = col(k);
            *o = dot3(c[0], cross(c[1], c[2])) / det;
        }
        Some(out)
    }

    /// Smallest ball with all of `s` on its boundary, restricted to their affine hull.
    fn circumball(s: &[[f64; 3]]) -> Option<([f64; 3], f64)> {
        let a = s[0];
        let center = match s.len() {
            1 => a,
            2 => [(a[0] + s[1][0]) / 2.0, (a[1] + s[1][1]) / 2.0, (a[2] + s[1][2]) / 2.0],
            3 => {
                let (b, c) = (sub(s[1], a), sub(s[2], a));
                let nrm = cross(b, c);
                let x = solve3([b, c, nrm], [dot3(b, b) / 2.0, dot3(c, c) / 2.0, 0.0])?;
                [a[0] + x[0], a[1] + x[1], a[2] + x[2]]
            }
            _ => {
                let (b, c, e) = (sub(s[1], a), sub(s[2], a), sub(s[3], a));
                let x = solve3([b, c, e], [dot3(b, b) / 2.0, dot3(c, c) / 2.0, dot3(e, e) / 2.0])?;
                [a[0] + x[0], a[1] + x[1], a[2] + x[2]]
            }
        };
        Some((center, dot3(sub(a, center), sub(a, center)).sqrt()))
    }

    fn exact_radius(p: &[[f64; 3]]) -> f64 {
        let n = p.len();
        let mut best = f64::INFINITY;
        let mut consider = |s: &[[f64; 3]]| {
            if let Some((c, r)) = circumball(s) {
                if r < best && p.iter().all(|x| dot3(sub(*x, c), sub(*x, c)).sqrt() <= r * (1.0 + 1e-9)) {
                    best = r;
                }
            }
        };
        for i in 0..n {
            for j in i + 1..n {
                consider(&[p[i], p[j]]);
                for k in j + 1..n {
                    consider(&[p[i], p[j], p[k]]);
                    for l in k + 1..n {
                        consider(&[p[i], p[j], p[k], p[l]]);
                    }
                }
            }
        }
        best
    }

    fn contains_all(ball: &Ball<f64>, pts: &[Point<f64>]) -> bool {
        pts.iter().all(|p| dist(&p.coords, &ball.center) <= ball.radius * (1.0 + 1e-12))
    }

    #[test]
    fn trivial_cases() {
        let one = smallest_enclosing_ball(&[pt(&[1.0, 2.0])], DEFAULT_SEB_TOL).unwrap();
        assert_eq!(one.center, vec![1.0, 2.0]);
        assert_eq!(one.radius, 0.0);

        let two = smallest_enclosing_ball(&[pt(&[0.0, 0.0]), pt(&[2.0, 0.0])], DEFAULT_SEB_TOL).unwrap();
        assert_relative_eq!(two.center[0], 1.0, epsilon = 1e-9);
        assert_relative_eq!(two.radius, 1.0, epsilon = 1e-9);

        let empty: Vec<Point<f64>> = Vec::new();
        assert!(matches!(smallest_enclosing_ball(&empty, 1e-6), Err(Error::Empty(_))));
    }

    #[test]
    fn matches_exact_oracle_in_3d() {
        let mut g = rng::rng(2024);
        for trial in 0..5 {
            let raw: Vec<[f64; 3]> = (0..50)
                .map(|_| [g.random_range(-1.0..1.0), g.random_range(-1.0..1.0), g.random_range(-1.0..1.0)])
                .collect();
            let pts: Vec<Point<f64>> = raw.iter().map(|c| pt(c)).collect();
            let ball = smallest_enclosing_ball(&pts, DEFAULT_SEB_TOL).unwrap();
            let exact = exact_radius(&raw);
            assert!(contains_all(&ball, &pts));
            assert!(ball.radius <= exact * (1.0 + DEFAULT_SEB_TOL) + 1e-12, "trial {trial}");
            assert!(ball.radius >= exact * (1.0 - 1e-9), "trial {trial}");
        }
    }

    #[test]
    fn permutation_invariant() {
        let mut g = rng::rng(5);
        let mut pts: Vec<Point<f64>> =
            (0..200).map(|_| pt(&(0..20).map(|_| g.random_range(-1.0..1.0)).collect::<Vec<_>>())).collect();
        let a = smallest_enclosing_ball(&pts, 1e-4).unwrap();
        pts.shuffle(&mut g);
        let b = smallest_enclosing_ball(&pts, 1e-4).unwrap();
        assert!((a.radius - b.radius).abs() <= 1e-4 * a.radius.max(b.radius));
        assert!(contains_all(&a, &pts) && contains_all(&b, &pts));
    }

    #[test]
    fn duplicated_points() {
        let pts = vec![pt(&[1.0, 1.0]); 10];
        let b = smallest_enclosing_ball(&pts, 1e-6).unwrap();
        assert_eq!(b.radius, 0.0);
    }
}
