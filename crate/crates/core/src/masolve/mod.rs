//! Dirichlet problems `det D²u = s(x)·w(x)^{-α}`, `u = φ` on the boundary:
//! problem description, the monotone wide-stencil discretisation, the damped
//! Newton solver, and the closed-form one-dimensional oracle.

mod discrete;
mod newton;
mod oned;
mod stencil;

pub use discrete::{default_disc, gradient, linearized_ma, ma_all, ma_monotone, Discretization, GridFunction, LinearizedMa, Nbr};
pub use newton::{solve, solve_on, IterationLog, IterationRecord, RhsSampling, Solution, SolverOptions};
pub use oned::{solve_1d, OneDimSolution};
pub use stencil::Stencil;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::domain::DomainSpec;
use crate::linalg::{dot, norm};
use crate::{Error, Result};

/// Distance-like weight `w` in `f = s·w^{-α}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Weight {
    /// `d_∂Ω(x)`
    Distance,
    /// `x_n − g(x')`
    GraphGap,
    /// `x_n`
    Height,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ScaleFn {
    Constant(f64),
    /// `base + coef·|x|²`
    Quadratic { base: f64, coef: f64 },
    /// Radial profile about `center`:
    /// `(R/max(r, r₁))^{n−1}·(1 + amp·(1 − r²/r₁²)₊)`. Built by
    /// [`ScaleFn::balanced`] so that for the distance weight on the disk of
    /// radius `R` the radial solution has `(u')ⁿ ∝ d^{1−α}` exactly on `r ≥ r₁`.
    Balanced { center: Vec<f64>, radius: f64, inner: f64, amp: f64 },
}

impl ScaleFn {
    pub fn eval(&self, p: &[f64]) -> f64 {
        match *self {
            ScaleFn::Constant(c) => c,
            ScaleFn::Quadratic { base, coef } => base + coef * dot(p, p),
            ScaleFn::Balanced { ref center, radius, inner, amp } => {
                let r = norm(&crate::linalg::sub(p, center));
                let bump = (1.0 - (r / inner).powi(2)).max(0.0);
                (radius / r.max(inner)).powi(p.len() as i32 - 1) * (1.0 + amp * bump)
            }
        }
    }

    /// Balanced profile for `α ∈ (1,2)` on the ball of the given center and
    /// radius, with `r₁ = R/2`. The amplitude makes the flux through `r₁`
    /// match the pure power law, which removes the constant term from `(u')ⁿ`.
    pub fn balanced(center: Vec<f64>, radius: f64, alpha: f64) -> Result<Self> {
        if !(alpha > 1.0 && alpha < 2.0) {
            return Err(Error::InvalidParameter(format!("balanced scale needs alpha in (1,2), got {alpha}")));
        }
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter("balanced scale needs a positive radius".into()));
        }
        let n = center.len() as i32;
        let inner = 0.5 * radius;
        let lead = (radius / inner).powi(n - 1);
        let kernel = |rho: f64| n as f64 * rho.powi(n - 1) * lead * (radius - rho).powf(-alpha);
        let base = simpson(|r| kernel(r), inner);
        let bump = simpson(|r| kernel(r) * (1.0 - (r / inner).powi(2)), inner);
        let target = n as f64 * radius.powi(n - 1) * (radius - inner).powf(1.0 - alpha) / (alpha - 1.0);
        let amp = (target - base) / bump;
        if !(amp > -1.0) {
            return Err(Error::InvalidParameter(format!("balanced amplitude {amp} makes the scale nonpositive")));
        }
        Ok(ScaleFn::Balanced { center, radius, inner, amp })
    }

    /// Bounds `(λ, Λ)` of `s` over the domain's bounding box.
    pub fn bounds(&self, domain: &DomainSpec) -> (f64, f64) {
        match *self {
            ScaleFn::Constant(c) => (c, c),
            ScaleFn::Quadratic { base, coef } => {
                let (lo, hi) = domain.bounding_box();
                let far: f64 = lo.iter().zip(&hi).map(|(a, b)| a.abs().max(b.abs()).powi(2)).sum();
                let near: f64 = lo
                    .iter()
                    .zip(&hi)
                    .map(|(a, b)| if *a <= 0.0 && *b >= 0.0 { 0.0 } else { a.abs().min(b.abs()).powi(2) })
                    .sum();
                let (x, y) = (base + coef * near, base + coef * far);
                (x.min(y), x.max(y))
            }
            ScaleFn::Balanced { ref center, radius, inner, amp } => {
                let n = center.len() as i32;
                let edge = (radius / inner).powi(n - 1);
                let core = edge * (1.0 + amp);
                (edge.min(core).min(1.0), edge.max(core))
            }
        }
    }
}

/// Composite Simpson rule on `[0, b]`.
fn simpson(f: impl Fn(f64) -> f64, b: f64) -> f64 {
    let m = 2048;
    let h = b / m as f64;
    let mut acc = f(0.0) + f(b);
    for i in 1..m {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    acc * h / 3.0
}

/// Catalog of boundary data, each given by a convex ambient extension `Φ`
/// that agrees with `φ` on the boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum BoundaryData {
    Zero,
    /// `½κ|x'|² + b·x'`
    Tangential { kappa: f64, slope: Vec<f64> },
    /// `½ Σ d_i x_i²`
    Quadratic { diag: Vec<f64> },
    /// `½|x'|² + x_n^{2−α}/((2−α)(1−α))`, `α ∈ [0,1)`
    Liouville { alpha: f64 },
}

impl BoundaryData {
    pub fn tag(&self) -> &'static str {
        match self {
            BoundaryData::Zero => "zero",
            BoundaryData::Tangential { .. } => "tangential",
            BoundaryData::Quadratic { .. } => "quadratic",
            BoundaryData::Liouville { .. } => "liouville",
        }
    }

    pub fn eval(&self, p: &[f64]) -> f64 {
        let n = p.len();
        match self {
            BoundaryData::Zero => 0.0,
            BoundaryData::Tangential { kappa, slope } => {
                let t = &p[..n - 1];
                0.5 * kappa * dot(t, t) + slope.iter().zip(t).map(|(b, x)| b * x).sum::<f64>()
            }
            BoundaryData::Quadratic { diag } => 0.5 * diag.iter().zip(p).map(|(d, x)| d * x * x).sum::<f64>(),
            BoundaryData::Liouville { alpha } => crate::barriers::u0_value(*alpha, p),
        }
    }

    pub fn grad(&self, p: &[f64]) -> Vec<f64> {
        let n = p.len();
        match self {
            BoundaryData::Zero => vec![0.0; n],
            BoundaryData::Tangential { kappa, slope } => {
                let mut g: Vec<f64> = (0..n - 1).map(|i| kappa * p[i] + slope.get(i).copied().unwrap_or(0.0)).collect();
                g.push(0.0);
                g
            }
            BoundaryData::Quadratic { diag } => diag.iter().zip(p).map(|(d, x)| d * x).collect(),
            BoundaryData::Liouville { alpha } => crate::barriers::u0_grad(*alpha, p),
        }
    }

    pub fn hess(&self, p: &[f64]) -> DMatrix<f64> {
        let n = p.len();
        match self {
            BoundaryData::Zero => DMatrix::zeros(n, n),
            BoundaryData::Tangential { kappa, .. } => {
                let mut h = DMatrix::identity(n, n) * *kappa;
                h[(n - 1, n - 1)] = 0.0;
                h
            }
            BoundaryData::Quadratic { diag } => DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(diag)),
            BoundaryData::Liouville { alpha } => crate::barriers::u0_hess(*alpha, p),
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        match self {
            BoundaryData::Zero => Ok(()),
            BoundaryData::Tangential { kappa, slope } => {
                if *kappa < 0.0 || slope.len() > dim.saturating_sub(1) {
                    return bad(format!("tangential data needs kappa >= 0 and at most {} slopes", dim - 1));
                }
                Ok(())
            }
            BoundaryData::Quadratic { diag } => {
                if diag.len() != dim || diag.iter().any(|d| *d < 0.0) {
                    return bad(format!("quadratic data needs {dim} nonnegative coefficients"));
                }
                Ok(())
            }
            BoundaryData::Liouville { alpha } => {
                if !(0.0..1.0).contains(alpha) {
                    return bad("liouville data needs alpha in [0,1)".into());
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub domain: DomainSpec,
    pub alpha: f64,
    pub weight: Weight,
    pub scale: ScaleFn,
    pub boundary: BoundaryData,
    pub mu: Option<f64>,
}

impl ProblemSpec {
    pub fn new(
        domain: DomainSpec,
        alpha: f64,
        weight: Weight,
        scale: ScaleFn,
        boundary: BoundaryData,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::IllPosed { alpha });
        }
        Self::unchecked_alpha(domain, alpha, weight, scale, boundary)
    }

    /// Same problem with `α = 0` (uniformly elliptic), used as the Newton seed.
    pub fn nondegenerate(&self) -> Self {
        Self { alpha: 0.0, ..self.clone() }
    }

    /// Constructor that also admits `α = 0`.
    pub fn unchecked_alpha(
        domain: DomainSpec,
        alpha: f64,
        weight: Weight,
        scale: ScaleFn,
        boundary: BoundaryData,
    ) -> Result<Self> {
        if !(0.0..2.0).contains(&alpha) {
            return Err(Error::IllPosed { alpha });
        }
        let (lo, hi) = scale.bounds(&domain);
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::InvalidParameter(format!("scale bounds must satisfy 0 < λ ≤ Λ, got ({lo}, {hi})")));
        }
        boundary.validate(domain.dim)?;
        if weight == Weight::GraphGap && matches!(domain.kind, crate::domain::DomainKind::Interval { .. }) {
            return Err(Error::InvalidParameter("graph-gap weight needs a graph coordinate".into()));
        }
        let p = ProblemSpec { domain, alpha, weight, scale, boundary, mu: None };
        p.check_boundary_continuity()?;
        Ok(p)
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = Some(mu);
        self
    }

    /// `(λ, Λ)`.
    pub fn scale_bounds(&self) -> (f64, f64) {
        self.scale.bounds(&self.domain)
    }

    fn check_boundary_continuity(&self) -> Result<()> {
        let samples = self.domain.sample_boundary(4096);
        let vals: Vec<f64> = samples.iter().map(|z| self.boundary.eval(z)).collect();
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("boundary data is not finite on the boundary".into()));
        }
        // Lipschitz-type check between nearby samples.
        for w in samples.windows(2).zip(vals.windows(2)) {
            let gap = norm(&crate::linalg::sub(&w.0[0], &w.0[1]));
            let jump = (w.1[0] - w.1[1]).abs();
            let lip = norm(&self.boundary.grad(&w.0[0])) + norm(&self.boundary.grad(&w.0[1])) + 1.0;
            if jump > 2.0 * lip * gap + 1e-12 && gap < 0.1 * self.domain.diameter() {
                return Err(Error::InvalidParameter(format!(
                    "boundary data jumps by {jump:.3e} between samples {:?} and {:?}",
                    w.0[0], w.0[1]
                )));
            }
        }
        Ok(())
    }

    pub fn weight_at(&self, p: &[f64]) -> Result<f64> {
        let n = self.domain.dim;
        Ok(match self.weight {
            Weight::Distance => self.domain.distance_to_boundary(p)?,
            Weight::Height => p[n - 1],
            Weight::GraphGap => {
                let jet = self
                    .domain
                    .lower_graph(&p[..n - 1])
                    .ok_or_else(|| Error::DomainMembership { point: p.to_vec() })?;
                p[n - 1] - jet.value
            }
        })
    }
}

/// `s(p)·w(p)^{-α}` at a strictly interior point.
pub fn rhs_eval(problem: &ProblemSpec, p: &[f64]) -> Result<f64> {
    if !problem.domain.contains(p) {
        return Err(Error::SingularEvaluation { point: p.to_vec(), weight: 0.0 });
    }
    let w = problem.weight_at(p)?;
    if !(w > 0.0) {
        return Err(Error::SingularEvaluation { point: p.to_vec(), weight: w });
    }
    Ok(problem.scale.eval(p) * w.powf(-problem.alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::GraphProfile;

    fn strip() -> DomainSpec {
        DomainSpec::graph(2, GraphProfile::flat(), 1.0, 1.0, 0.25).unwrap()
    }

    #[test]
    fn rhs_examples() {
        let p = ProblemSpec::new(strip(), 0.5, Weight::Height, ScaleFn::Constant(1.0), BoundaryData::Zero).unwrap();
        assert!((rhs_eval(&p, &[0.1, 0.25]).unwrap() - 2.0).abs() < 1e-15);
        let p = ProblemSpec::new(strip(), 1.0, Weight::Height, ScaleFn::Constant(1.0), BoundaryData::Zero).unwrap();
        assert!((rhs_eval(&p, &[0.1, 0.1]).unwrap() - 10.0).abs() < 1e-12);
        let disk = DomainSpec::disk(vec![0.0, 1.0], 1.0, 0.5).unwrap();
        let p = ProblemSpec::new(disk, 0.5, Weight::Distance, ScaleFn::Constant(1.0), BoundaryData::Zero).unwrap();
        // radial point at distance 0.04 from the bottom of the disk
        assert!((rhs_eval(&p, &[0.0, 0.04]).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn rhs_rejects_boundary_points() {
        let p = ProblemSpec::new(strip(), 0.5, Weight::Height, ScaleFn::Constant(1.0), BoundaryData::Zero).unwrap();
        assert!(matches!(rhs_eval(&p, &[0.0, 0.0]), Err(Error::SingularEvaluation { .. })));
        assert!(matches!(rhs_eval(&p, &[0.0, -0.5]), Err(Error::SingularEvaluation { .. })));
    }

    #[test]
    fn alpha_range_is_enforced() {
        for a in [0.0, 2.0, 2.5, -1.0] {
            let r = ProblemSpec::new(strip(), a, Weight::Height, ScaleFn::Constant(1.0), BoundaryData::Zero);
            assert!(matches!(r, Err(Error::IllPosed { .. })));
        }
    }

    #[test]
    fn scale_bounds_must_be_positive() {
        let r = ProblemSpec::new(strip(), 0.5, Weight::Height, ScaleFn::Constant(0.0), BoundaryData::Zero);
        assert!(r.is_err());
        let s = ScaleFn::Quadratic { base: 1.0, coef: 0.5 };
        let (lo, hi) = s.bounds(&strip());
        assert_eq!(lo, 1.0);
        assert!((hi - 2.0).abs() < 1e-15);
    }

    #[test]
    fn tangential_data_derivatives() {
        let b = BoundaryData::Tangential { kappa: 2.0, slope: vec![0.5] };
        assert_eq!(b.eval(&[1.0, 3.0]), 1.5);
        assert_eq!(b.grad(&[1.0, 3.0]), vec![2.5, 0.0]);
        assert_eq!(b.hess(&[1.0, 3.0])[(0, 0)], 2.0);
    }

    #[test]
    fn balanced_scale_gives_power_flux() {
        for (n, alpha) in [(2usize, 1.5), (2, 1.25), (3, 1.5)] {
            let mut center = vec![0.0; n];
            center[n - 1] = 1.0;
            let sc = ScaleFn::balanced(center.clone(), 1.0, alpha).unwrap();
            let k = n as f64 / (alpha - 1.0);
            for r in [0.6, 0.8, 0.95] {
                let flux = |rho: f64| {
                    let mut q = center.clone();
                    q[0] += rho;
                    n as f64 * rho.powi(n as i32 - 1) * sc.eval(&q) * (1.0 - rho).powf(-alpha)
                };
                let total = simpson(&flux, 0.5) + {
                    let m = 20000;
                    let h = (r - 0.5) / m as f64;
                    (0..m).map(|i| flux(0.5 + (i as f64 + 0.5) * h) * h).sum::<f64>()
                };
                let exact = k * (1.0 - r).powf(1.0 - alpha);
                assert!((total / exact - 1.0).abs() < 1e-4, "n={n} α={alpha} r={r}: {total} vs {exact}");
            }
        }
        assert!(ScaleFn::balanced(vec![0.0, 1.0], 1.0, 0.5).is_err());
    }
}
