//! Sampled certificates for barrier inequalities and comparisons with
//! discrete solutions.

use serde::Serialize;

use super::{Barrier, Family, Params};
use crate::domain::DomainSpec;
use crate::linalg::{dot, halton};
use crate::masolve::{BoundaryData, GridFunction, ProblemSpec};
use crate::{Error, Result};

/// Margin slack that still counts as a pass (floating-point rounding).
pub const PASS_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Inequality {
    /// `det D²b ≥ Λ w^{−α}`, `b ≤ φ` on the boundary
    Subsolution,
    /// `det D²b ≤ λ w^{−α}`, `b ≥ φ` on the boundary
    Supersolution,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sense {
    /// field ≤ solution
    Lower,
    /// field ≥ solution
    Upper,
}

/// Sampling region `Ω ∩ {x_n ≤ cut}`.
#[derive(Clone, Debug)]
pub struct Region {
    pub cut: f64,
    pub samples: usize,
    pub boundary_samples: usize,
    /// Bound for the barrier on `Ω ∩ {x_n = cut}`: the solution minimum for
    /// lower barriers, an upper bound of the solution for upper barriers.
    pub cut_bound: Option<f64>,
    /// Extra PDE sample points (e.g. grid nodes).
    pub extra_points: Vec<Vec<f64>>,
}

impl Region {
    pub fn new(cut: f64) -> Self {
        Region { cut, samples: 1 << 14, boundary_samples: 4096, cut_bound: None, extra_points: Vec::new() }
    }

    pub fn with_cut_bound(mut self, bound: f64) -> Self {
        self.cut_bound = Some(bound);
        self
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CertificatePart {
    pub name: String,
    pub samples: usize,
    pub worst_margin: f64,
    pub witness: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RegionSummary {
    pub cut: f64,
    pub cut_bound: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Certificate {
    pub family: String,
    pub inequality: Inequality,
    pub alpha: f64,
    pub parameters: serde_json::Value,
    pub region: RegionSummary,
    pub samples: usize,
    pub worst_margin: f64,
    pub witness: Vec<f64>,
    pub pass: bool,
    pub parts: Vec<CertificatePart>,
}

impl Certificate {
    pub fn part(&self, name: &str) -> Option<&CertificatePart> {
        self.parts.iter().find(|p| p.name == name)
    }
}

struct Tally {
    name: &'static str,
    count: usize,
    worst: f64,
    witness: Vec<f64>,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Tally { name, count: 0, worst: f64::INFINITY, witness: Vec::new() }
    }

    fn add(&mut self, p: &[f64], margin: f64) {
        self.count += 1;
        if margin < self.worst || self.witness.is_empty() {
            self.worst = margin;
            self.witness = p.to_vec();
        }
    }

    fn finish(self) -> CertificatePart {
        CertificatePart { name: self.name.to_string(), samples: self.count, worst_margin: self.worst, witness: self.witness }
    }
}

/// Boundary ordering is only claimed by the families used as comparison
/// functions near the boundary.
fn orders_boundary(b: &Barrier) -> bool {
    matches!(b.family, Family::Vstar | Family::Vminus | Family::Vplus | Family::LogAlpha1)
}

fn region_box(domain: &DomainSpec, cut: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let (lo, mut hi) = domain.bounding_box();
    let n = domain.dim;
    hi[n - 1] = hi[n - 1].min(cut);
    if !(hi[n - 1] > lo[n - 1]) {
        return Err(Error::Argument(format!("cut {cut} leaves an empty region")));
    }
    Ok((lo, hi))
}

/// Interior samples of `Ω ∩ {x_n ≤ cut}` (Halton points plus extras).
fn interior_samples(domain: &DomainSpec, region: &Region) -> Result<Vec<Vec<f64>>> {
    let (lo, hi) = region_box(domain, region.cut)?;
    let n = domain.dim;
    let mut out = Vec::with_capacity(region.samples);
    let mut i = 0;
    while out.len() < region.samples && i < 40 * region.samples.max(1) {
        let h = halton(i, n);
        i += 1;
        let p: Vec<f64> = (0..n).map(|a| lo[a] + (hi[a] - lo[a]) * h[a]).collect();
        if domain.contains(&p) {
            out.push(p);
        }
    }
    for p in &region.extra_points {
        if p.len() == n && p[n - 1] <= region.cut && domain.contains(p) {
            out.push(p.clone());
        }
    }
    Ok(out)
}

/// Boundary samples of `∂Ω ∩ {x_n ≤ cut}`, dense on the lower graph.
fn boundary_samples(domain: &DomainSpec, region: &Region) -> Vec<Vec<f64>> {
    let n = domain.dim;
    let scale = domain.diameter();
    let mut out: Vec<Vec<f64>> =
        domain.sample_boundary(region.boundary_samples).into_iter().filter(|z| z[n - 1] <= region.cut).collect();
    let (lo, hi) = domain.bounding_box();
    for i in 0..region.boundary_samples {
        let xt: Vec<f64> = if n == 2 {
            vec![lo[0] + (hi[0] - lo[0]) * (i as f64 + 0.5) / region.boundary_samples as f64]
        } else {
            let h = halton(i, 2);
            (0..2).map(|a| lo[a] + (hi[a] - lo[a]) * h[a]).collect()
        };
        if let Some(j) = domain.lower_graph(&xt) {
            let mut z = xt;
            z.push(j.value);
            if z[n - 1] <= region.cut && domain.boundary_residual(&z) <= 1e-9 * scale {
                out.push(z);
            }
        }
    }
    out
}

fn cut_samples(domain: &DomainSpec, region: &Region) -> Vec<Vec<f64>> {
    let n = domain.dim;
    let (lo, hi) = domain.bounding_box();
    if region.cut >= hi[n - 1] || region.cut <= lo[n - 1] {
        return Vec::new();
    }
    let count = region.boundary_samples;
    (0..count)
        .filter_map(|i| {
            let mut p: Vec<f64> = if n == 2 {
                vec![lo[0] + (hi[0] - lo[0]) * (i as f64 + 0.5) / count as f64]
            } else {
                let h = halton(i, 2);
                (0..2).map(|a| lo[a] + (hi[a] - lo[a]) * h[a]).collect()
            };
            p.push(region.cut);
            domain.contains(&p).then_some(p)
        })
        .collect()
}

fn skippable(e: &Error) -> bool {
    matches!(e, Error::DomainMembership { .. })
}

#[derive(Clone, Copy)]
struct Parts {
    pde: bool,
    boundary: bool,
}

fn certify_parts(
    b: &Barrier,
    problem: &ProblemSpec,
    region: &Region,
    inequality: Inequality,
    parts: Parts,
) -> Result<Certificate> {
    if problem.domain.dim != b.dim {
        return Err(Error::Argument("barrier and problem dimensions differ".into()));
    }
    let (lam, big_lam) = problem.scale_bounds();
    let alpha = problem.alpha;
    let mut out = Vec::new();
    if parts.pde {
        let mut tally = Tally::new("pde");
        for p in interior_samples(&problem.domain, region)? {
            let w = problem.weight_at(&p)?;
            if !(w > 0.0) {
                continue;
            }
            if matches!(b.params, Params::V0 { .. } | Params::Vstar { .. }) && inequality == Inequality::Subsolution {
                let ratio = b.v0_bracket_ratio(&p)?;
                if ratio < 1.0 - 1e-12 {
                    return Err(Error::Range(format!(
                        "det(2μI − B t^(1−α) D²g) ≥ μ^(n−1) fails at {p:?} (ratio {ratio:.6}); the cut c* is too large"
                    )));
                }
            }
            let h = b.hess(&p)?;
            let scale = h.amax().max(1.0);
            let min_eig = h.clone().symmetric_eigenvalues().min();
            if min_eig < -1e-10 * scale {
                return Err(Error::Range(format!(
                    "{} Hessian is not positive semidefinite at {p:?} (smallest eigenvalue {min_eig:.3e})",
                    b.family.tag()
                )));
            }
            let d = b.det_hess(&p)?;
            let margin = match inequality {
                Inequality::Subsolution => {
                    let f = big_lam * w.powf(-alpha);
                    (d - f) / f
                }
                Inequality::Supersolution => {
                    let f = lam * w.powf(-alpha);
                    (f - d) / f
                }
            };
            tally.add(&p, margin);
        }
        out.push(tally.finish());
    }
    if parts.boundary && orders_boundary(b) {
        let sign = match inequality {
            Inequality::Subsolution => 1.0,
            Inequality::Supersolution => -1.0,
        };
        let mut tally = Tally::new("boundary");
        for z in boundary_samples(&problem.domain, region) {
            match b.eval(&z) {
                Ok(v) => tally.add(&z, sign * (problem.boundary.eval(&z) - v)),
                Err(e) if skippable(&e) => {}
                Err(e) => return Err(e),
            }
        }
        out.push(tally.finish());
        if let Some(bound) = region.cut_bound {
            let mut tally = Tally::new("cut");
            for p in cut_samples(&problem.domain, region) {
                match b.eval(&p) {
                    Ok(v) => tally.add(&p, sign * (bound - v)),
                    Err(e) if skippable(&e) => {}
                    Err(e) => return Err(e),
                }
            }
            out.push(tally.finish());
        }
    }
    let (mut worst, mut witness) = (f64::INFINITY, Vec::new());
    for part in &out {
        if part.worst_margin < worst {
            worst = part.worst_margin;
            witness = part.witness.clone();
        }
    }
    let samples = out.iter().map(|p| p.samples).sum();
    Ok(Certificate {
        family: b.family.tag().to_string(),
        inequality,
        alpha: b.alpha,
        parameters: b.params_json(),
        region: RegionSummary { cut: region.cut, cut_bound: region.cut_bound },
        samples,
        worst_margin: worst,
        witness,
        pass: samples > 0 && worst >= -PASS_SLACK,
        parts: out,
    })
}

pub fn certify_subsolution(b: &Barrier, problem: &ProblemSpec, region: &Region) -> Result<Certificate> {
    certify_parts(b, problem, region, Inequality::Subsolution, Parts { pde: true, boundary: true })
}

pub fn certify_supersolution(b: &Barrier, problem: &ProblemSpec, region: &Region) -> Result<Certificate> {
    certify_parts(b, problem, region, Inequality::Supersolution, Parts { pde: true, boundary: true })
}

/// Threshold of a monotone predicate by doubling (or halving) from `start`
/// followed by log-bisection. `larger_passes` gives the monotonicity
/// direction. Returns a passing value closest to the threshold found, or
/// `None` if no probe passed.
pub fn find_threshold<F>(start: f64, larger_passes: bool, mut pass: F, log: &mut Vec<(f64, bool)>) -> Result<Option<f64>>
where
    F: FnMut(f64) -> Result<bool>,
{
    let mut probe = |x: f64, log: &mut Vec<(f64, bool)>| -> Result<bool> {
        let ok = pass(x)?;
        log.push((x, ok));
        Ok(ok)
    };
    let grow = if larger_passes { 2.0 } else { 0.5 };
    let mut x = start;
    let first = probe(x, log)?;
    // (good, bad) bracket
    let (mut good, mut bad);
    if first {
        good = x;
        bad = f64::NAN;
        for _ in 0..40 {
            x /= grow;
            if probe(x, log)? {
                good = x;
            } else {
                bad = x;
                break;
            }
        }
        if bad.is_nan() {
            return Ok(Some(good));
        }
    } else {
        bad = x;
        good = f64::NAN;
        for _ in 0..60 {
            x *= grow;
            if probe(x, log)? {
                good = x;
                break;
            }
            bad = x;
        }
        if good.is_nan() {
            return Ok(None);
        }
    }
    for _ in 0..24 {
        let mid = (good * bad).sqrt();
        if probe(mid, log)? {
            good = mid;
        } else {
            bad = mid;
        }
        if (good / bad - 1.0).abs() < 1e-3 {
            break;
        }
    }
    Ok(Some(good))
}

#[derive(Clone, Debug, Serialize)]
pub struct SearchStep {
    pub parameter: String,
    pub value: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SearchOutcome {
    pub parameters: serde_json::Value,
    pub certificate: Certificate,
    pub steps: Vec<SearchStep>,
    #[serde(skip)]
    pub barrier: Barrier,
}

fn record(steps: &mut Vec<SearchStep>, name: &str, log: Vec<(f64, bool)>) {
    steps.extend(log.into_iter().map(|(value, pass)| SearchStep { parameter: name.to_string(), value, pass }));
}

fn failed_search(name: &str) -> Error {
    Error::Range(format!("no admissible value of {name} found"))
}

/// Searches the family constants one at a time: first the constant that
/// controls the PDE inequality, then the one that controls the boundary
/// ordering, starting from the template's values.
pub fn search_constants(template: &Barrier, problem: &ProblemSpec, region: &Region) -> Result<SearchOutcome> {
    let mut steps = Vec::new();
    let pde_only = Parts { pde: true, boundary: false };
    let full = Parts { pde: true, boundary: true };
    let ok = |r: Result<Certificate>| -> Result<bool> {
        match r {
            Ok(c) => Ok(c.pass),
            Err(Error::Range(_)) => Ok(false),
            Err(e) => Err(e),
        }
    };
    let (barrier, ineq) = match template.params.clone() {
        Params::Vminus { phi0, grad0, c0, c1 } => {
            let mk = |c0: f64, c1: f64| template.with_params(Params::Vminus { phi0, grad0: grad0.clone(), c0, c1 });
            let mut log = Vec::new();
            let c0 = find_threshold(
                c0,
                true,
                |x| ok(certify_parts(&mk(x, c1)?, problem, region, Inequality::Subsolution, pde_only)),
                &mut log,
            )?
            .ok_or_else(|| failed_search("C0"))?;
            record(&mut steps, "C0", std::mem::take(&mut log));
            let c1 = find_threshold(
                c1.max(1e-3),
                true,
                |x| ok(certify_parts(&mk(c0, x)?, problem, region, Inequality::Subsolution, full)),
                &mut log,
            )?
            .ok_or_else(|| failed_search("C1"))?;
            record(&mut steps, "C1", log);
            (mk(c0, c1)?, Inequality::Subsolution)
        }
        Params::Vplus { phi0, grad0, c1, big_c } => {
            let mk = |c1: f64, c: f64| template.with_params(Params::Vplus { phi0, grad0: grad0.clone(), c1, big_c: c });
            let mut log = Vec::new();
            let c1 = find_threshold(
                c1,
                false,
                |x| ok(certify_parts(&mk(x, big_c)?, problem, region, Inequality::Supersolution, pde_only)),
                &mut log,
            )?
            .ok_or_else(|| failed_search("c1"))?;
            record(&mut steps, "c1", std::mem::take(&mut log));
            let c = find_threshold(
                big_c.max(1e-3),
                true,
                |x| ok(certify_parts(&mk(c1, x)?, problem, region, Inequality::Supersolution, full)),
                &mut log,
            )?
            .ok_or_else(|| failed_search("C"))?;
            record(&mut steps, "C", log);
            (mk(c1, c)?, Inequality::Supersolution)
        }
        Params::LogAlpha1 { lower, phi0, grad0, c, k } => {
            let ineq = if lower { Inequality::Subsolution } else { Inequality::Supersolution };
            let mk = |c: f64, k: f64| template.with_params(Params::LogAlpha1 { lower, phi0, grad0: grad0.clone(), c, k });
            let mut log = Vec::new();
            let c = find_threshold(c, lower, |x| ok(certify_parts(&mk(x, k)?, problem, region, ineq, pde_only)), &mut log)?
                .ok_or_else(|| failed_search("c"))?;
            record(&mut steps, "c", std::mem::take(&mut log));
            let k = find_threshold(k.max(1e-3), true, |x| ok(certify_parts(&mk(c, x)?, problem, region, ineq, full)), &mut log)?
                .ok_or_else(|| failed_search("k"))?;
            record(&mut steps, "k", log);
            (mk(c, k)?, ineq)
        }
        Params::V0 { mu, big_lambda } => {
            // the bracket only holds in a layer: shrink the cut, then grow Λ
            let mk = |l: f64| template.with_params(Params::V0 { mu, big_lambda: l });
            let at = |c: f64| Region { cut: c, ..region.clone() };
            let mut log = Vec::new();
            let cut = find_threshold(
                region.cut,
                false,
                |x| ok(certify_parts(&mk(big_lambda)?, problem, &at(x), Inequality::Subsolution, pde_only)),
                &mut log,
            )?
            .ok_or_else(|| failed_search("cut"))?;
            record(&mut steps, "cut", std::mem::take(&mut log));
            let l = find_threshold(
                big_lambda,
                true,
                |x| ok(certify_parts(&mk(x)?, problem, &at(cut), Inequality::Subsolution, pde_only)),
                &mut log,
            )?
            .ok_or_else(|| failed_search("Lambda"))?;
            record(&mut steps, "Lambda", log);
            let b = mk(l)?;
            let cert = certify_subsolution(&b, problem, &at(cut))?;
            return Ok(SearchOutcome { parameters: b.params_json(), certificate: cert, steps, barrier: b });
        }
        Params::Vstar { mu, big_lambda, c_star, big_c } => {
            let mk = |cs: f64, c: f64| template.with_params(Params::Vstar { mu, big_lambda, c_star: cs, big_c: c });
            let at = |cs: f64| Region { cut: cs, ..region.clone() };
            let mut log = Vec::new();
            let cs = find_threshold(
                c_star,
                false,
                |x| ok(certify_parts(&mk(x, 0.0)?, problem, &at(x), Inequality::Subsolution, pde_only)),
                &mut log,
            )?
            .ok_or_else(|| failed_search("c*"))?;
            record(&mut steps, "c*", std::mem::take(&mut log));
            let c = find_threshold(
                big_c.max(1e-3),
                true,
                |x| ok(certify_parts(&mk(cs, x)?, problem, &at(cs), Inequality::Subsolution, full)),
                &mut log,
            )?
            .ok_or_else(|| failed_search("C*"))?;
            record(&mut steps, "C*", log);
            let b = mk(cs, c)?;
            let cert = certify_subsolution(&b, problem, &at(cs))?;
            return Ok(SearchOutcome { parameters: b.params_json(), certificate: cert, steps, barrier: b });
        }
        _ => (template.clone(), Inequality::Subsolution),
    };
    let cert = certify_parts(&barrier, problem, region, ineq, full)?;
    Ok(SearchOutcome { parameters: barrier.params_json(), certificate: cert, steps, barrier })
}

/// A function sampled at grid nodes for comparison with a solution.
pub trait ScalarField {
    fn value(&self, p: &[f64]) -> Result<f64>;
    /// Norm of the Hessian, used to size the discretization allowance.
    fn hess_norm(&self, _p: &[f64]) -> f64 {
        0.0
    }
    fn label(&self) -> String;
}

impl ScalarField for Barrier {
    fn value(&self, p: &[f64]) -> Result<f64> {
        self.eval(p)
    }
    fn hess_norm(&self, p: &[f64]) -> f64 {
        self.hess(p).map(|h| h.norm()).unwrap_or(0.0)
    }
    fn label(&self) -> String {
        self.family.tag().to_string()
    }
}

impl ScalarField for GridFunction {
    fn value(&self, p: &[f64]) -> Result<f64> {
        self.interpolate(p).ok_or_else(|| Error::DomainMembership { point: p.to_vec() })
    }
    fn label(&self) -> String {
        "grid function".into()
    }
}

/// `Φ(x) + offset + slope·x` with `Φ` the extension of the boundary data;
/// a convex upper barrier whenever it dominates `φ` on the boundary.
#[derive(Clone, Debug)]
pub struct Envelope {
    pub data: BoundaryData,
    pub offset: f64,
    pub slope: Vec<f64>,
}

impl ScalarField for Envelope {
    fn value(&self, p: &[f64]) -> Result<f64> {
        Ok(self.data.eval(p) + self.offset + dot(&self.slope, p))
    }
    fn hess_norm(&self, p: &[f64]) -> f64 {
        self.data.hess(p).norm()
    }
    fn label(&self) -> String {
        format!("{} envelope", self.data.tag())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Comparison {
    pub field: String,
    pub sense: Sense,
    pub nodes: usize,
    pub skipped: usize,
    pub worst_margin: f64,
    pub witness: Vec<f64>,
    pub pass: bool,
}

/// Checks `field ≤ u` (lower) or `field ≥ u` (upper) at the grid nodes with
/// `x_n ≤ cut`, allowing `Δ²‖D²field‖/4` per node for the consistency
/// error of the sampled field.
pub fn compare_to_solution(field: &dyn ScalarField, u: &GridFunction, cut: f64, sense: Sense) -> Result<Comparison> {
    let g = u.grid();
    let n = g.dim;
    let h2 = g.spacing * g.spacing;
    let (mut nodes, mut skipped) = (0, 0);
    let (mut worst, mut witness) = (f64::INFINITY, Vec::new());
    for i in 0..g.len() {
        let p = g.point(i);
        if p[n - 1] > cut {
            continue;
        }
        let v = match field.value(p) {
            Ok(v) => v,
            Err(Error::SingularEvaluation { .. } | Error::DomainMembership { .. }) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let allowance = 0.25 * h2 * field.hess_norm(p);
        let gap = match sense {
            Sense::Lower => u.values[i] - v,
            Sense::Upper => v - u.values[i],
        };
        nodes += 1;
        if gap + allowance < worst {
            worst = gap + allowance;
            witness = p.to_vec();
        }
    }
    Ok(Comparison {
        field: field.label(),
        sense,
        nodes,
        skipped,
        worst_margin: worst,
        witness,
        pass: nodes > 0 && worst >= -PASS_SLACK,
    })
}
