use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Bracket around the standard Gaussian upper tail `Pr[N(0,1) ≥ t]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailBounds {
    pub lower: f64,
    pub upper: f64,
}

/// `φ(t)·(1/t − 1/t³) ≤ Pr[N(0,1) ≥ t] ≤ φ(t)/t`, valid for `t > 1`.
pub fn gaussian_tail_bounds(t: f64) -> Result<TailBounds> {
    if !(t > 1.0) || !t.is_finite() {
        return Err(invalid(format!("tail bounds need a finite t > 1, got {t}")));
    }
    let density = (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let upper = (density / t).min(1.0);
    let lower = (density * (1.0 / t - 1.0 / (t * t * t))).clamp(0.0, upper);
    Ok(TailBounds { lower, upper })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use statrs::function::erf::erfc;

    fn tail(t: f64) -> f64 {
        0.5 * erfc(t / std::f64::consts::SQRT_2)
    }

    #[test]
    fn t_equals_two() {
        let b = gaussian_tail_bounds(2.0).unwrap();
        assert_relative_eq!(b.lower, 0.020250, epsilon = 1e-5);
        assert_relative_eq!(b.upper, 0.027000, epsilon = 1e-5);
        assert_relative_eq!(tail(2.0), 0.022750, epsilon = 1e-5);
        assert!(b.lower <= tail(2.0) && tail(2.0) <= b.upper);
    }

    #[test]
    fn bracket_tightens() {
        let b = gaussian_tail_bounds(10.0).unwrap();
        assert!((b.upper - b.lower) / b.upper <= 0.01);
    }

    #[test]
    fn near_one() {
        let b = gaussian_tail_bounds(1.0001).unwrap();
        assert!(b.lower < 1e-4);
        assert!(b.lower <= tail(1.0001));
    }

    #[test]
    fn rejects_small_t() {
        assert!(gaussian_tail_bounds(1.0).is_err());
        assert!(gaussian_tail_bounds(0.5).is_err());
        assert!(gaussian_tail_bounds(f64::NAN).is_err());
    }

    #[test]
    fn brackets_on_grid() {
        let mut t = 1.5;
        while t <= 12.0 + 1e-9 {
            let b = gaussian_tail_bounds(t).unwrap();
            let exact = tail(t);
            assert!(b.lower <= exact && exact <= b.upper, "t = {t}");
            t += 0.5;
        }
    }
}
