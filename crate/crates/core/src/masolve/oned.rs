//! Closed-form solutions of `u'' = x^{-α}` on an interval `[a, b] ⊂ [0, ∞)`.

use serde::Serialize;

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OneDimSolution {
    pub alpha: f64,
    /// `u = P(x) + slope·x + offset`
    pub slope: f64,
    pub offset: f64,
}

fn particular(alpha: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if alpha == 1.0 {
        x * x.ln()
    } else {
        x.powf(2.0 - alpha) / ((2.0 - alpha) * (1.0 - alpha))
    }
}

fn particular_d(alpha: f64, x: f64) -> f64 {
    if alpha == 1.0 {
        x.ln() + 1.0
    } else {
        x.powf(1.0 - alpha) / (1.0 - alpha)
    }
}

impl OneDimSolution {
    pub fn eval(&self, x: f64) -> f64 {
        particular(self.alpha, x) + self.slope * x + self.offset
    }

    pub fn derivative(&self, x: f64) -> f64 {
        particular_d(self.alpha, x) + self.slope
    }
}

/// `u'' = x^{-α}` on `[lo, hi]`, `u(lo) = ua`, `u(hi) = ub`. The value of
/// the particular solution at `x = 0` is its limit.
pub fn solve_1d(alpha: f64, interval: (f64, f64), ua: f64, ub: f64) -> Result<OneDimSolution> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::IllPosed { alpha });
    }
    let (lo, hi) = interval;
    if !(lo >= 0.0 && hi > lo) {
        return Err(Error::InvalidParameter(format!("interval ({lo}, {hi}) must satisfy 0 <= lo < hi")));
    }
    let (pa, pb) = (particular(alpha, lo), particular(alpha, hi));
    let slope = ((ub - pb) - (ua - pa)) / (hi - lo);
    let offset = ua - pa - slope * lo;
    Ok(OneDimSolution { alpha, slope, offset })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_examples() {
        let u = solve_1d(0.5, (0.0, 1.0), 0.0, 0.0).unwrap();
        assert!((u.eval(0.25) + 1.0 / 6.0).abs() < 1e-15);
        let oracle = |x: f64| 4.0 / 3.0 * (x.powf(1.5) - x);
        for x in [0.1, 0.5, 0.9] {
            assert!((u.eval(x) - oracle(x)).abs() < 1e-15);
        }
        let u = solve_1d(1.0, (0.0, 1.0), 0.0, 0.0).unwrap();
        assert!((u.eval(0.5) - 0.5 * 0.5f64.ln()).abs() < 1e-15);
        assert!((u.eval(0.5) + 0.34657359027997264).abs() < 1e-15);
        let u = solve_1d(1.5, (0.0, 1.0), 0.0, 0.0).unwrap();
        assert!((u.eval(0.25) + 1.0).abs() < 1e-14);
    }

    #[test]
    fn second_derivative_matches() {
        for alpha in [0.25, 0.5, 1.0, 1.5] {
            let u = solve_1d(alpha, (0.0, 1.0), 1.0, -2.0).unwrap();
            assert!((u.eval(0.0) - 1.0).abs() < 1e-14 && (u.eval(1.0) + 2.0).abs() < 1e-14);
            let (x, h) = (0.3, 1e-4);
            let d2 = (u.eval(x + h) - 2.0 * u.eval(x) + u.eval(x - h)) / (h * h);
            assert!((d2 / x.powf(-alpha) - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn ill_posed_range() {
        assert!(matches!(solve_1d(2.0, (0.0, 1.0), 0.0, 0.0), Err(Error::IllPosed { .. })));
        assert!(matches!(solve_1d(3.1, (0.0, 1.0), 0.0, 0.0), Err(Error::IllPosed { .. })));
    }
}
