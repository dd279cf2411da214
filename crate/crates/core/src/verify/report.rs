//! Power-law fits and scaling reports.

use serde::Serialize;

use crate::{Error, Result};

/// Absolute tolerance on fitted exponents.
pub const SLOPE_TOL: f64 = 0.08;
pub const MIN_R2: f64 = 0.98;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least squares of `log v` on `log t`.
pub fn fit_power_law(pairs: &[(f64, f64)]) -> Result<PowerFit> {
    if pairs.len() < 4 {
        return Err(Error::Argument(format!("power-law fit needs at least 4 pairs, got {}", pairs.len())));
    }
    if pairs.iter().any(|(t, v)| !(*t > 0.0 && *v > 0.0)) {
        return Err(Error::Argument("power-law fit needs positive values".into()));
    }
    let k = pairs.len() as f64;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Argument("power-law fit needs distinct abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    Ok(PowerFit { slope, intercept, r2 })
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingReport {
    pub quantity: String,
    pub pairs: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub predicted: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Set when the fit could not be performed.
    pub error: Option<String>,
}

impl ScalingReport {
    pub fn new(quantity: &str, pairs: Vec<(f64, f64)>, predicted: f64, tolerance: f64) -> Self {
        match fit_power_law(&pairs) {
            Ok(f) => ScalingReport {
                quantity: quantity.to_string(),
                pass: (f.slope - predicted).abs() <= tolerance && f.r2 >= MIN_R2,
                slope: f.slope,
                intercept: f.intercept,
                r2: f.r2,
                pairs,
                predicted,
                tolerance,
                error: None,
            },
            Err(e) => ScalingReport {
                quantity: quantity.to_string(),
                pairs,
                slope: f64::NAN,
                intercept: f64::NAN,
                r2: f64::NAN,
                predicted,
                tolerance,
                pass: false,
                error: Some(e.to_string()),
            },
        }
    }

    /// One aligned line for terminal output.
    pub fn summary(&self) -> String {
        format!(
            "{:<20} slope {:>9.5}  predicted {:>9.5}  ±{:<5}  R² {:>7.5}  n {:>3}  {}",
            self.quantity,
            self.slope,
            self.predicted,
            self.tolerance,
            self.r2,
            self.pairs.len(),
            if self.pass { "PASS" } else { "FAIL" }
        )
    }

    pub fn to_text(&self) -> String {
        let mut s = self.summary();
        s.push('\n');
        s.push_str(&format!("{:>24} {:>24}\n", "h", "value"));
        for (t, v) in &self.pairs {
            s.push_str(&format!("{t:>24.16e} {v:>24.16e}\n"));
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("h,value\n");
        for (t, v) in &self.pairs {
            s.push_str(&format!("{t:.16e},{v:.16e}\n"));
        }
        s
    }
}
