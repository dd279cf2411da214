//! Closed-form barrier catalog with analytic gradients, Hessians and
//! determinants, sub/supersolution certificates and solution comparisons.
//!
//! Every family has the shape
//! `b(x) = c + q|x'|² + ℓ·x' + γ g*(x') + Ψ(t) + k x_n`, `t = x_n − g(x')`
//! (or `t = x_n` for the half-space families), so that
//! `D²b = [2qI + γD²g* − Ψ'(t)D²g] ⊕ 0 + Ψ''(t) w wᵀ`, `w = (−∇g, 1)`, and
//! `det D²b = Ψ''(t)·det(2qI + γD²g* − Ψ'(t)D²g)`.

mod certify;

pub use certify::{
    certify_subsolution, certify_supersolution, compare_to_solution, find_threshold, search_constants, Certificate,
    CertificatePart, Comparison, Envelope, Inequality, Region, ScalarField, SearchOutcome, SearchStep, Sense,
};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::domain::{DomainKind, DomainSpec};
use crate::linalg::{det, dot, norm};
use crate::{Error, Result};

/// `U₀(x) = ½|x'|² + x_n^{2−α}/((2−α)(1−α))`.
pub fn u0_value(alpha: f64, p: &[f64]) -> f64 {
    let n = p.len();
    let t = &p[..n - 1];
    let k = 1.0 / ((2.0 - alpha) * (1.0 - alpha));
    0.5 * dot(t, t) + k * p[n - 1].max(0.0).powf(2.0 - alpha)
}

pub fn u0_grad(alpha: f64, p: &[f64]) -> Vec<f64> {
    let n = p.len();
    let mut g = p.to_vec();
    g[n - 1] = p[n - 1].max(0.0).powf(1.0 - alpha) / (1.0 - alpha);
    g
}

pub fn u0_hess(alpha: f64, p: &[f64]) -> DMatrix<f64> {
    let n = p.len();
    let mut h = DMatrix::identity(n, n);
    h[(n - 1, n - 1)] = p[n - 1].powf(-alpha);
    h
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Family {
    V0,
    Vstar,
    PointedW,
    U0,
    Vplus,
    Vminus,
    LogAlpha1,
    PlaneShift,
}

impl Family {
    pub fn tag(self) -> &'static str {
        match self {
            Family::V0 => "V0",
            Family::Vstar => "VSTAR",
            Family::PointedW => "POINTED_W",
            Family::U0 => "U0",
            Family::Vplus => "VPLUS",
            Family::Vminus => "VMINUS",
            Family::LogAlpha1 => "LOG_ALPHA1",
            Family::PlaneShift => "PLANE_SHIFT",
        }
    }
}

/// Family parameters, named as in the barrier formulas.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "family")]
pub enum Params {
    #[serde(rename = "U0")]
    U0,
    #[serde(rename = "V0")]
    V0 { mu: f64, big_lambda: f64 },
    /// `v* = v₀ − C*(x_n − g*)`, `g*` the slope-limited minorant of `g`
    /// with slope bound `c*ρ/2`.
    #[serde(rename = "VSTAR")]
    Vstar { mu: f64, big_lambda: f64, c_star: f64, big_c: f64 },
    #[serde(rename = "POINTED_W")]
    PointedW { big_lambda: f64, eps: f64, h: f64, c1: f64 },
    /// `φ(0) + ∇φ(0)·x' − c₁/(2−β) t^{2−β} + C x_n`
    #[serde(rename = "VPLUS")]
    Vplus { phi0: f64, grad0: Vec<f64>, c1: f64, big_c: f64 },
    /// `φ(0) + ∇φ(0)·x' − C₀/(2−β) t^{2−β} − C₁ x_n`
    #[serde(rename = "VMINUS")]
    Vminus { phi0: f64, grad0: Vec<f64>, c0: f64, c1: f64 },
    /// `φ(0) + ∇φ(0)·x' − c t(−log t)^{1/n} ∓ k x_n`, lower sign for `lower`.
    #[serde(rename = "LOG_ALPHA1")]
    LogAlpha1 { lower: bool, phi0: f64, grad0: Vec<f64>, c: f64, k: f64 },
    #[serde(rename = "PLANE_SHIFT")]
    PlaneShift { offset: f64, slope: Vec<f64> },
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Psi {
    None,
    /// `coef·t^exp`
    Power { coef: f64, exp: f64 },
    /// `coef·t(−ln t)^{1/n}`
    Log { coef: f64, n: f64 },
}

impl Psi {
    fn value(&self, t: f64) -> f64 {
        match *self {
            Psi::None => 0.0,
            Psi::Power { coef, exp } => {
                if t == 0.0 {
                    0.0
                } else {
                    coef * t.powf(exp)
                }
            }
            Psi::Log { coef, n } => {
                if t == 0.0 {
                    0.0
                } else {
                    coef * t * (-t.ln()).powf(1.0 / n)
                }
            }
        }
    }

    /// `(Ψ', Ψ'')` at `t > 0`.
    fn derivs(&self, t: f64) -> (f64, f64) {
        match *self {
            Psi::None => (0.0, 0.0),
            Psi::Power { coef, exp } => (coef * exp * t.powf(exp - 1.0), coef * exp * (exp - 1.0) * t.powf(exp - 2.0)),
            Psi::Log { coef, n } => {
                let l = -t.ln();
                let d1 = l.powf(1.0 / n) - l.powf(1.0 / n - 1.0) / n;
                let d2 = -(l.powf(1.0 / n - 1.0) / (n * t)) * (1.0 + (1.0 - 1.0 / n) / l);
                (coef * d1, coef * d2)
            }
        }
    }
}

#[derive(Clone, Debug)]
struct Shape {
    cst: f64,
    quad: f64,
    lin: Vec<f64>,
    gstar: f64,
    psi: Psi,
    xn: f64,
    graph: bool,
}

/// `g` with derivatives at `x'` (zero when the family ignores the graph).
struct GJet {
    g: f64,
    grad: Vec<f64>,
    hess: DMatrix<f64>,
}

#[derive(Clone, Debug)]
pub struct Barrier {
    pub family: Family,
    pub alpha: f64,
    pub dim: usize,
    pub params: Params,
    domain: Option<DomainSpec>,
    shape: Shape,
    /// `(r₀, σ)` of the slope-limited minorant `g*` (VSTAR only).
    gstar_knee: Option<(f64, f64)>,
}

fn range(msg: impl Into<String>) -> Error {
    Error::Range(msg.into())
}

fn check_alpha(family: Family, alpha: f64) -> Result<()> {
    let ok = match family {
        Family::U0 | Family::V0 | Family::Vstar | Family::PointedW => alpha > 0.0 && alpha < 1.0,
        Family::Vplus | Family::Vminus => alpha > 1.0 && alpha < 2.0,
        Family::LogAlpha1 => alpha == 1.0,
        Family::PlaneShift => alpha > 0.0 && alpha < 2.0,
    };
    if ok {
        Ok(())
    } else {
        let want = match family {
            Family::U0 | Family::V0 | Family::Vstar | Family::PointedW => "alpha in (0,1)",
            Family::Vplus | Family::Vminus => "alpha in (1,2)",
            Family::LogAlpha1 => "alpha = 1",
            Family::PlaneShift => "alpha in (0,2)",
        };
        Err(range(format!("{} requires {want}, got alpha = {alpha}", family.tag())))
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(range(format!("{name} must be positive, got {v}")))
    }
}

/// `β = (n + α − 1)/n`.
pub fn beta(n: usize, alpha: f64) -> f64 {
    (n as f64 + alpha - 1.0) / n as f64
}

impl Barrier {
    pub fn u0(alpha: f64, dim: usize) -> Result<Self> {
        Self::build(Family::U0, alpha, dim, Params::U0, None)
    }

    pub fn v0(domain: &DomainSpec, alpha: f64, mu: f64, big_lambda: f64) -> Result<Self> {
        Self::build(Family::V0, alpha, domain.dim, Params::V0 { mu, big_lambda }, Some(domain.clone()))
    }

    pub fn vstar(domain: &DomainSpec, alpha: f64, mu: f64, big_lambda: f64, c_star: f64, big_c: f64) -> Result<Self> {
        Self::build(
            Family::Vstar,
            alpha,
            domain.dim,
            Params::Vstar { mu, big_lambda, c_star, big_c },
            Some(domain.clone()),
        )
    }

    pub fn pointed_w(alpha: f64, dim: usize, big_lambda: f64, eps: f64, h: f64, c1: f64) -> Result<Self> {
        Self::build(Family::PointedW, alpha, dim, Params::PointedW { big_lambda, eps, h, c1 }, None)
    }

    pub fn vplus(domain: &DomainSpec, alpha: f64, phi0: f64, grad0: Vec<f64>, c1: f64, big_c: f64) -> Result<Self> {
        Self::build(Family::Vplus, alpha, domain.dim, Params::Vplus { phi0, grad0, c1, big_c }, Some(domain.clone()))
    }

    pub fn vminus(domain: &DomainSpec, alpha: f64, phi0: f64, grad0: Vec<f64>, c0: f64, c1: f64) -> Result<Self> {
        Self::build(Family::Vminus, alpha, domain.dim, Params::Vminus { phi0, grad0, c0, c1 }, Some(domain.clone()))
    }

    pub fn log_alpha1(domain: &DomainSpec, lower: bool, phi0: f64, grad0: Vec<f64>, c: f64, k: f64) -> Result<Self> {
        Self::build(
            Family::LogAlpha1,
            1.0,
            domain.dim,
            Params::LogAlpha1 { lower, phi0, grad0, c, k },
            Some(domain.clone()),
        )
    }

    pub fn plane_shift(dim: usize, offset: f64, slope: Vec<f64>) -> Result<Self> {
        Self::build(Family::PlaneShift, 1.0, dim, Params::PlaneShift { offset, slope }, None)
    }

    /// Same family and domain with new parameters.
    pub fn with_params(&self, params: Params) -> Result<Self> {
        Self::build(self.family, self.alpha, self.dim, params, self.domain.clone())
    }

    pub fn domain(&self) -> Option<&DomainSpec> {
        self.domain.as_ref()
    }

    fn build(family: Family, alpha: f64, dim: usize, params: Params, domain: Option<DomainSpec>) -> Result<Self> {
        check_alpha(family, alpha)?;
        if !(2..=3).contains(&dim) {
            return Err(range(format!("barriers need dimension 2 or 3, got {dim}")));
        }
        if let Some(d) = &domain {
            if d.dim != dim {
                return Err(range("barrier and domain dimensions differ"));
            }
            if matches!(d.kind, DomainKind::Interval { .. }) {
                return Err(range("barriers need a domain with a boundary graph"));
            }
        }
        let n = dim as f64;
        let m = dim - 1;
        let lin_of = |g: &Vec<f64>| -> Result<Vec<f64>> {
            if g.len() != m {
                return Err(range(format!("∇φ(0) must have {m} components")));
            }
            Ok(g.clone())
        };
        let mut knee = None;
        let shape = match &params {
            Params::U0 => Shape {
                cst: 0.0,
                quad: 0.5,
                lin: vec![0.0; m],
                gstar: 0.0,
                psi: Psi::Power { coef: 1.0 / ((2.0 - alpha) * (1.0 - alpha)), exp: 2.0 - alpha },
                xn: 0.0,
                graph: false,
            },
            Params::V0 { mu, big_lambda } => {
                positive("mu", *mu)?;
                positive("Lambda", *big_lambda)?;
                Shape {
                    cst: 0.0,
                    quad: *mu,
                    lin: vec![0.0; m],
                    gstar: 0.0,
                    psi: Psi::Power {
                        coef: big_lambda / ((2.0 - alpha) * (1.0 - alpha) * mu.powi(m as i32)),
                        exp: 2.0 - alpha,
                    },
                    xn: 0.0,
                    graph: true,
                }
            }
            Params::Vstar { mu, big_lambda, c_star, big_c } => {
                positive("mu", *mu)?;
                positive("Lambda", *big_lambda)?;
                positive("c*", *c_star)?;
                if *big_c < 0.0 {
                    return Err(range("C* must be nonnegative"));
                }
                let d = domain.as_ref().ok_or_else(|| range("VSTAR needs a domain"))?;
                knee = Some(gstar_knee(d, c_star * d.rho / 2.0)?);
                Shape {
                    cst: 0.0,
                    quad: *mu,
                    lin: vec![0.0; m],
                    gstar: *big_c,
                    psi: Psi::Power {
                        coef: big_lambda / ((2.0 - alpha) * (1.0 - alpha) * mu.powi(m as i32)),
                        exp: 2.0 - alpha,
                    },
                    xn: -big_c,
                    graph: true,
                }
            }
            Params::PointedW { big_lambda, eps, h, c1 } => {
                positive("Lambda", *big_lambda)?;
                positive("h", *h)?;
                positive("C1", *c1)?;
                if *eps < 0.0 {
                    return Err(range("epsilon must be nonnegative"));
                }
                let e_t = n / (n + 1.0 - alpha);
                Shape {
                    cst: 0.0,
                    quad: h / (2.0 * c1 * c1 * h.powf(e_t)),
                    lin: vec![0.0; m],
                    gstar: 0.0,
                    psi: Psi::Power {
                        coef: big_lambda * c1.powi(2 * m as i32) * h / ((2.0 - alpha) * (1.0 - alpha))
                            * h.powf(-e_t * (2.0 - alpha)),
                        exp: 2.0 - alpha,
                    },
                    xn: *eps,
                    graph: false,
                }
            }
            Params::Vplus { phi0, grad0, c1, big_c } => {
                positive("c1", *c1)?;
                let b = beta(dim, alpha);
                Shape {
                    cst: *phi0,
                    quad: 0.0,
                    lin: lin_of(grad0)?,
                    gstar: 0.0,
                    psi: Psi::Power { coef: -c1 / (2.0 - b), exp: 2.0 - b },
                    xn: *big_c,
                    graph: true,
                }
            }
            Params::Vminus { phi0, grad0, c0, c1 } => {
                positive("C0", *c0)?;
                let b = beta(dim, alpha);
                Shape {
                    cst: *phi0,
                    quad: 0.0,
                    lin: lin_of(grad0)?,
                    gstar: 0.0,
                    psi: Psi::Power { coef: -c0 / (2.0 - b), exp: 2.0 - b },
                    xn: -c1,
                    graph: true,
                }
            }
            Params::LogAlpha1 { lower, phi0, grad0, c, k } => {
                positive("log-barrier coefficient", *c)?;
                Shape {
                    cst: *phi0,
                    quad: 0.0,
                    lin: lin_of(grad0)?,
                    gstar: 0.0,
                    psi: Psi::Log { coef: -c, n },
                    xn: if *lower { -k } else { *k },
                    graph: true,
                }
            }
            Params::PlaneShift { offset, slope } => {
                if slope.len() != dim {
                    return Err(range(format!("plane slope must have {dim} components")));
                }
                Shape {
                    cst: *offset,
                    quad: 0.0,
                    lin: slope[..m].to_vec(),
                    gstar: 0.0,
                    psi: Psi::None,
                    xn: slope[m],
                    graph: false,
                }
            }
        };
        if shape.graph && domain.is_none() {
            return Err(range(format!("{} needs a domain for g", family.tag())));
        }
        Ok(Barrier { family, alpha, dim, params, domain, shape, gstar_knee: knee })
    }

    fn gjet(&self, xt: &[f64]) -> Result<GJet> {
        let m = self.dim - 1;
        if !self.shape.graph {
            return Ok(GJet { g: 0.0, grad: vec![0.0; m], hess: DMatrix::zeros(m, m) });
        }
        let d = self.domain.as_ref().expect("graph families carry a domain");
        let j = d.lower_graph(xt).ok_or_else(|| {
            let mut p = xt.to_vec();
            p.push(f64::NAN);
            Error::DomainMembership { point: p }
        })?;
        Ok(GJet { g: j.value, grad: j.grad, hess: j.hess })
    }

    /// `g*` with gradient and Hessian.
    fn gstar(&self, xt: &[f64], jet: &GJet) -> (f64, Vec<f64>, DMatrix<f64>) {
        let m = self.dim - 1;
        let Some((r0, sigma)) = self.gstar_knee else {
            return (jet.g, jet.grad.clone(), jet.hess.clone());
        };
        let r = norm(xt);
        if r <= r0 {
            return (jet.g, jet.grad.clone(), jet.hess.clone());
        }
        let d = self.domain.as_ref().unwrap();
        let e: Vec<f64> = xt.iter().map(|x| x / r).collect();
        let at_knee: Vec<f64> = e.iter().map(|x| x * r0).collect();
        let g0 = d.lower_graph(&at_knee).map(|j| j.value).unwrap_or(jet.g);
        let grad = e.iter().map(|x| sigma * x).collect();
        let mut hess = DMatrix::identity(m, m) * (sigma / r);
        for i in 0..m {
            for k in 0..m {
                hess[(i, k)] -= sigma / r * e[i] * e[k];
            }
        }
        (g0 + sigma * (r - r0), grad, hess)
    }

    /// `t = x_n − g(x')` (or `x_n`).
    pub fn gap(&self, p: &[f64]) -> Result<f64> {
        let n = self.dim;
        Ok(p[n - 1] - self.gjet(&p[..n - 1])?.g)
    }

    fn valid_point(&self, p: &[f64], strict: bool) -> Result<(GJet, f64)> {
        if p.len() != self.dim {
            return Err(Error::Argument(format!("point has dimension {}, barrier {}", p.len(), self.dim)));
        }
        let n = self.dim;
        let jet = self.gjet(&p[..n - 1])?;
        let mut t = p[n - 1] - jet.g;
        // boundary points computed in floating point
        if !strict && t < 0.0 && t > -1e-12 * (1.0 + jet.g.abs()) {
            t = 0.0;
        }
        let singular = match self.shape.psi {
            Psi::None => false,
            _ => t < 0.0 || (strict && t == 0.0),
        };
        let log_bad = matches!(self.shape.psi, Psi::Log { .. }) && t >= 1.0;
        if singular || log_bad {
            return Err(Error::SingularEvaluation { point: p.to_vec(), weight: t });
        }
        Ok((jet, t))
    }

    pub fn eval(&self, p: &[f64]) -> Result<f64> {
        let (jet, t) = self.valid_point(p, false)?;
        let n = self.dim;
        let xt = &p[..n - 1];
        let s = &self.shape;
        let gs = if s.gstar != 0.0 { self.gstar(xt, &jet).0 } else { 0.0 };
        Ok(s.cst + s.quad * dot(xt, xt) + dot(&s.lin, xt) + s.gstar * gs + s.psi.value(t) + s.xn * p[n - 1])
    }

    pub fn grad(&self, p: &[f64]) -> Result<Vec<f64>> {
        let (jet, t) = self.valid_point(p, true)?;
        let n = self.dim;
        let xt = &p[..n - 1];
        let s = &self.shape;
        let (d1, _) = s.psi.derivs(t);
        let gs = if s.gstar != 0.0 { self.gstar(xt, &jet).1 } else { vec![0.0; n - 1] };
        let mut g: Vec<f64> =
            (0..n - 1).map(|i| 2.0 * s.quad * xt[i] + s.lin[i] + s.gstar * gs[i] - d1 * jet.grad[i]).collect();
        g.push(d1 + s.xn);
        Ok(g)
    }

    /// Tangential block `2qI + γD²g* − Ψ'D²g` and `Ψ''`, `∇g`.
    fn blocks(&self, p: &[f64]) -> Result<(DMatrix<f64>, f64, Vec<f64>)> {
        let (jet, t) = self.valid_point(p, true)?;
        let n = self.dim;
        let xt = &p[..n - 1];
        let s = &self.shape;
        let (d1, d2) = s.psi.derivs(t);
        let mut m = DMatrix::identity(n - 1, n - 1) * (2.0 * s.quad) - &jet.hess * d1;
        if s.gstar != 0.0 {
            m += self.gstar(xt, &jet).2 * s.gstar;
        }
        Ok((m, d2, jet.grad))
    }

    pub fn hess(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let (m, d2, dg) = self.blocks(p)?;
        let n = self.dim;
        let mut h = DMatrix::zeros(n, n);
        let mut w = dg.iter().map(|x| -x).collect::<Vec<f64>>();
        w.push(1.0);
        for i in 0..n {
            for j in 0..n {
                let base = if i < n - 1 && j < n - 1 { m[(i, j)] } else { 0.0 };
                h[(i, j)] = base + d2 * w[i] * w[j];
            }
        }
        Ok(h)
    }

    /// Closed-form `det D²b = Ψ''·det(tangential block)`.
    pub fn det_hess(&self, p: &[f64]) -> Result<f64> {
        let (m, d2, _) = self.blocks(p)?;
        Ok(d2 * det(&m))
    }

    /// Determinant of the V₀ bracket `2μI − B t^{1−α}D²g` divided by
    /// `μ^{n−1}`; the V₀ identity is a subsolution iff this is ≥ 1.
    pub fn v0_bracket_ratio(&self, p: &[f64]) -> Result<f64> {
        let (mu, big_lambda) = match self.params {
            Params::V0 { mu, big_lambda } | Params::Vstar { mu, big_lambda, .. } => (mu, big_lambda),
            _ => return Err(range("bracket defined for V0/VSTAR only")),
        };
        let (jet, t) = self.valid_point(p, true)?;
        let m = self.dim - 1;
        let b = big_lambda / ((1.0 - self.alpha) * mu.powi(m as i32));
        let br = DMatrix::identity(m, m) * (2.0 * mu) - &jet.hess * (b * t.powf(1.0 - self.alpha));
        let min_eig = br.clone().symmetric_eigenvalues().min();
        if min_eig <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(det(&br) / mu.powi(m as i32))
    }

    pub fn params_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.params).unwrap_or(serde_json::Value::Null)
    }
}

/// Knee `(r₀, σ)` of the slope-limited minorant of a radially symmetric `g`.
fn gstar_knee(d: &DomainSpec, sigma: f64) -> Result<(f64, f64)> {
    let m = d.dim - 1;
    let centred = match &d.kind {
        DomainKind::Disk { center, .. } => center[..m].iter().all(|c| *c == 0.0),
        DomainKind::Ellipse { center, .. } => center[0] == 0.0,
        DomainKind::Graph { .. } => true,
        DomainKind::Interval { .. } => false,
    };
    if !centred {
        return Err(range("VSTAR needs a lower graph symmetric about x' = 0"));
    }
    let (lo, hi) = d.bounding_box();
    let rmax = (0..m).map(|a| lo[a].abs().min(hi[a].abs())).fold(f64::INFINITY, f64::min);
    let slope = |r: f64| {
        let mut x = vec![0.0; m];
        x[0] = r;
        d.lower_graph(&x).map(|j| norm(&j.grad)).unwrap_or(f64::INFINITY)
    };
    let mut a = 0.0;
    let mut b = rmax * (1.0 - 1e-12);
    if slope(b) <= sigma {
        return Ok((b, sigma));
    }
    for _ in 0..200 {
        let c = 0.5 * (a + b);
        if slope(c) <= sigma {
            a = c;
        } else {
            b = c;
        }
    }
    Ok((a, sigma))
}

/// Finite-difference Hessian of `f` at `p` with step `h`.
fn fd_hessian<F: Fn(&[f64]) -> Result<f64>>(f: F, p: &[f64], h: f64) -> Result<DMatrix<f64>> {
    let n = p.len();
    let mut m = DMatrix::zeros(n, n);
    let f0 = f(p)?;
    let shifted = |i: usize, si: f64, j: usize, sj: f64| {
        let mut q = p.to_vec();
        q[i] += si;
        q[j] += sj;
        f(&q)
    };
    for i in 0..n {
        m[(i, i)] = (shifted(i, h, i, 0.0)? - 2.0 * f0 + shifted(i, -h, i, 0.0)?) / (h * h);
        for j in 0..i {
            let v = (shifted(i, h, j, h)? - shifted(i, h, j, -h)? - shifted(i, -h, j, h)? + shifted(i, -h, j, -h)?)
                / (4.0 * h * h);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

/// Max relative deviation between the closed-form `det D²b` and the
/// determinant of a Richardson-extrapolated central finite-difference
/// Hessian of `b` (steps `h`, `h/2` with `h = 2·10⁻³·min(1, t)`, `t` the
/// distance-like variable of the family). Zero determinants are compared in
/// absolute terms.
pub fn det_hessian_crosscheck(b: &Barrier, samples: &[Vec<f64>]) -> Result<f64> {
    let mut worst = 0.0f64;
    for p in samples {
        let t = b.gap(p)?;
        let step = 2e-3 * t.clamp(1e-6, 1.0);
        let exact = b.det_hess(p)?;
        let coarse = fd_hessian(|q| b.eval(q), p, step)?;
        let fine = fd_hessian(|q| b.eval(q), p, 0.5 * step)?;
        let fd = det(&((fine * 4.0 - coarse) / 3.0));
        let dev = if exact == 0.0 { fd.abs() } else { ((fd - exact) / exact).abs() };
        worst = worst.max(dev);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::GraphProfile;
    use crate::linalg::halton;

    fn parabola() -> DomainSpec {
        DomainSpec::graph(2, GraphProfile::parabola(1.0), 1.0, 1.0, 0.25).unwrap()
    }

    fn samples(b: &Barrier, lo: f64, hi: f64, count: usize) -> Vec<Vec<f64>> {
        let n = b.dim;
        let mut out = Vec::new();
        let mut i = 0;
        while out.len() < count {
            let h = halton(i, n);
            i += 1;
            let mut p: Vec<f64> = h[..n - 1].iter().map(|x| 0.6 * (2.0 * x - 1.0)).collect();
            let g = if b.shape.graph { b.gjet(&p).unwrap().g } else { 0.0 };
            p.push(g + lo + (hi - lo) * h[n - 1]);
            out.push(p);
        }
        out
    }

    #[test]
    fn u0_values() {
        let b = Barrier::u0(0.5, 2).unwrap();
        assert!((b.eval(&[0.0, 1.0]).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert!((b.det_hess(&[0.3, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(b.hess(&[0.0, 0.0]), Err(Error::SingularEvaluation { .. })));
        assert_eq!(b.eval(&[0.0, 0.0]).unwrap(), 0.0);
        for alpha in [0.1, 0.25, 0.75] {
            let b = Barrier::u0(alpha, 2).unwrap();
            let v = b.eval(&[0.0, 1.0]).unwrap();
            assert!((v - 1.0 / ((2.0 - alpha) * (1.0 - alpha))).abs() < 1e-14);
        }
    }

    #[test]
    fn plane_shift_is_affine() {
        let b = Barrier::plane_shift(2, 1.0, vec![2.0, -1.0]).unwrap();
        assert_eq!(b.grad(&[0.3, 0.4]).unwrap(), vec![2.0, -1.0]);
        assert_eq!(b.hess(&[0.3, 0.4]).unwrap(), DMatrix::zeros(2, 2));
        assert_eq!(b.det_hess(&[0.3, 0.4]).unwrap(), 0.0);
    }

    #[test]
    fn u0_crosscheck() {
        let b = Barrier::u0(0.5, 2).unwrap();
        let s = samples(&b, 0.1, 1.0, 100);
        assert!(det_hessian_crosscheck(&b, &s).unwrap() <= 1e-6);
    }

    #[test]
    fn v0_on_parabola_crosscheck() {
        let b = Barrier::v0(&parabola(), 0.5, 0.5, 1.0).unwrap();
        let s = samples(&b, 0.1, 0.4, 100);
        assert!(det_hessian_crosscheck(&b, &s).unwrap() <= 1e-5);
    }

    #[test]
    fn v0_flat_identity() {
        let flat = DomainSpec::graph(2, GraphProfile::flat(), 1.0, 1.0, 0.25).unwrap();
        let (mu, lam, alpha) = (0.7, 3.0, 0.4);
        let b = Barrier::v0(&flat, alpha, mu, lam).unwrap();
        for p in samples(&b, 0.01, 0.9, 50) {
            let expect = lam / mu * (2.0 * mu) * p[1].powf(-alpha);
            assert!(((b.det_hess(&p).unwrap() - expect) / expect).abs() < 1e-13);
        }
    }

    #[test]
    fn every_family_crosschecks() {
        let d = parabola();
        let d3 = DomainSpec::graph(3, GraphProfile { curvature: 1.0, quartic: 0.2 }, 1.0, 1.0, 0.2).unwrap();
        let disk = DomainSpec::disk(vec![0.0, 1.0], 1.0, 0.5).unwrap();
        let fams = vec![
            Barrier::u0(0.3, 3).unwrap(),
            Barrier::v0(&d3, 0.5, 0.5, 1.0).unwrap(),
            Barrier::vstar(&d, 0.5, 0.5, 1.0, 0.2, 3.0).unwrap(),
            Barrier::vstar(&d3, 0.5, 0.5, 1.0, 0.2, 3.0).unwrap(),
            Barrier::pointed_w(0.5, 2, 1.0, 0.1, 0.05, 1.5).unwrap(),
            Barrier::vplus(&disk, 1.5, 0.1, vec![0.2], 0.5, 2.0).unwrap(),
            Barrier::vminus(&d3, 1.25, 0.0, vec![0.0, 0.1], 2.0, 1.0).unwrap(),
            Barrier::log_alpha1(&disk, true, 0.0, vec![0.0], 2.0, 1.0).unwrap(),
            Barrier::log_alpha1(&d3, false, 0.0, vec![0.0, 0.0], 0.5, 1.0).unwrap(),
            Barrier::plane_shift(2, 1.0, vec![1.0, 2.0]).unwrap(),
        ];
        for b in &fams {
            let s = samples(b, 0.1, 0.3, 100);
            let dev = det_hessian_crosscheck(b, &s).unwrap();
            assert!(dev <= 1e-5, "{:?}: {dev}", b.family);
            for p in &s {
                let h = b.hess(p).unwrap();
                assert!((&h - h.transpose()).amax() <= 1e-15 * h.amax().max(1.0));
            }
        }
    }

    #[test]
    fn pointed_w_determinant_is_exact() {
        for (alpha, h) in [(0.5, 0.01), (0.25, 0.2)] {
            let b = Barrier::pointed_w(alpha, 2, 2.0, 0.0, h, 1.3).unwrap();
            let p = [0.1, 0.2];
            assert!((b.det_hess(&p).unwrap() / (2.0 * 0.2f64.powf(-alpha)) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn vplus_vminus_scale_like_weight() {
        let disk = DomainSpec::disk(vec![0.0, 1.0], 1.0, 0.5).unwrap();
        let b = Barrier::vminus(&disk, 1.5, 0.0, vec![0.0], 2.0, 1.0).unwrap();
        let bt = beta(2, 1.5);
        // det = C0^n (β−1) det D²g t^{−α}
        for p in [[0.0, 0.05], [0.2, 0.3], [-0.4, 0.2]] {
            let t = b.gap(&p).unwrap();
            let s = (1.0 - p[0] * p[0]).sqrt();
            let d2g = 1.0 / s + p[0] * p[0] / (s * s * s);
            let expect = 4.0 * (bt - 1.0) * d2g * t.powf(-1.5);
            assert!((b.det_hess(&p).unwrap() / expect - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn parameter_ranges() {
        assert!(matches!(Barrier::u0(1.5, 2), Err(Error::Range(_))));
        assert!(matches!(Barrier::vplus(&parabola(), 0.5, 0.0, vec![0.0], 1.0, 1.0), Err(Error::Range(_))));
        assert!(matches!(Barrier::log_alpha1(&parabola(), true, 0.0, vec![0.0], 1.0, 1.0).map(|_| ()), Ok(())));
        assert!(matches!(Barrier::v0(&parabola(), 0.5, -1.0, 1.0), Err(Error::Range(_))));
        let off = DomainSpec::disk(vec![0.3, 1.0], 1.0, 0.5).unwrap();
        assert!(matches!(Barrier::vstar(&off, 0.5, 0.5, 1.0, 0.1, 1.0), Err(Error::Range(_))));
    }

    #[test]
    fn gstar_is_slope_limited_minorant() {
        let d = parabola();
        let b = Barrier::vstar(&d, 0.5, 0.5, 1.0, 0.4, 1.0).unwrap();
        let (r0, sigma) = b.gstar_knee.unwrap();
        assert!((r0 - sigma).abs() < 1e-12); // g' = r for g = r²/2
        for x in [-0.9, -0.3, 0.0, 0.02, 0.5, 0.95] {
            let jet = b.gjet(&[x]).unwrap();
            let (gs, _, _) = b.gstar(&[x], &jet);
            assert!(gs <= jet.g + 1e-15);
        }
    }
}
