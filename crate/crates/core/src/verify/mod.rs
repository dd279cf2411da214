//! Scaling experiments: localization exponents, the Liouville
//! residual, the tangential expansion and maximal-section scaling, with
//! log-log power-law fits.

mod report;

pub use report::{fit_power_law, PowerFit, ScalingReport, MIN_R2, SLOPE_TOL};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::barriers::u0_value;
use crate::domain::{DomainSpec, GraphProfile};
use crate::linalg::{dot, norm, sub};
use crate::masolve::{default_disc, ma_monotone, BoundaryData, GridFunction, ProblemSpec};
use crate::sections::{
    base_plane, maximal_interior_section, quotient_fit, section, section_with_plane, sweep, Plane,
    SectionOptions, SweepRow,
};
use crate::{Error, Result};

/// Dyadic heights: explicit, or chosen from the solution.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Heights {
    /// Largest dyadic `h ≤ 1` whose section is untruncated, halved down to
    /// the smallest resolved one.
    Auto,
    List(Vec<f64>),
}

const MAX_OCTAVES: usize = 40;

/// The heights of `spec` whose sections at `x0` are resolved and untruncated.
pub fn select_heights(
    u: &GridFunction,
    phi: &BoundaryData,
    x0: &[f64],
    spec: &Heights,
    opts: &SectionOptions,
) -> Result<(Vec<f64>, Vec<(f64, String)>)> {
    let (plane, frame) = base_plane(u, phi, x0, opts)?;
    let probe = |h: f64| section_with_plane(u, plane.clone(), frame.as_ref(), h, opts);
    let mut used = Vec::new();
    let mut excluded = Vec::new();
    let hs: Vec<f64> = match spec {
        Heights::List(hs) => hs.clone(),
        Heights::Auto => (0..MAX_OCTAVES).map(|k| 0.5f64.powi(k as i32)).collect(),
    };
    for h in hs {
        let sec = probe(h)?;
        if sec.truncated {
            excluded.push((h, "truncated".to_string()));
        } else if !sec.resolved {
            excluded.push((h, "unresolved".to_string()));
            if *spec == Heights::Auto {
                break;
            }
        } else {
            used.push(h);
        }
    }
    Ok((used, excluded))
}

#[derive(Clone, Debug, Serialize)]
pub struct LocalizationReport {
    pub alpha: f64,
    pub base_point: Vec<f64>,
    pub plane: Plane,
    pub rows: Vec<SweepRow>,
    pub excluded: Vec<(f64, String)>,
    pub tangential: ScalingReport,
    pub normal: ScalingReport,
    /// `(h, K)` with `ε_{h/K} ∩ grid ⊂ S_h ⊂ ε_{Kh}`
    pub sandwich: Vec<(f64, f64)>,
    /// Max/min of `K` over the upper half of the height range.
    pub sandwich_spread: f64,
    /// b(h) two-sided bound over all pairs of used heights.
    pub b_bounds_hold: bool,
}

impl LocalizationReport {
    pub fn pass(&self) -> bool {
        self.tangential.pass && self.normal.pass
    }
}

/// `|(x−x₀)_τ|² + |(x−x₀)·ν|^{2−α}`
fn eps_gauge(d: &[f64], normal: &[f64], alpha: f64) -> f64 {
    let s = dot(d, normal);
    let t2 = (dot(d, d) - s * s).max(0.0);
    t2 + s.abs().powf(2.0 - alpha)
}

pub fn localization_experiment(
    u: &GridFunction,
    phi: &BoundaryData,
    x0: &[f64],
    heights: &Heights,
    alpha: f64,
    opts: &SectionOptions,
) -> Result<LocalizationReport> {
    let (used, excluded) = select_heights(u, phi, x0, heights, opts)?;
    if used.is_empty() {
        return Err(Error::Experiment("every section is truncated or unresolved".into()));
    }
    let rows = sweep(u, phi, x0, &used, alpha, opts)?;
    let (plane, frame) = base_plane(u, phi, x0, opts)?;
    let mut sandwich = Vec::new();
    for &h in &used {
        let sec = section_with_plane(u, plane.clone(), frame.as_ref(), h, opts)?;
        let disc = &u.disc;
        let mut inside = vec![false; disc.len()];
        for &i in &sec.members {
            inside[i] = true;
        }
        let (mut k_out, mut e_in) = (0.0f64, f64::INFINITY);
        for i in 0..disc.len() {
            let d = sub(disc.grid.point(i), x0);
            let e = eps_gauge(&d, &sec.normal, alpha);
            if inside[i] {
                k_out = k_out.max(e / h);
            } else if dot(&d, &sec.normal) >= 0.0 {
                e_in = e_in.min(e);
            }
        }
        sandwich.push((h, k_out.max(h / e_in)));
    }
    let top = &sandwich[..sandwich.len().div_ceil(2)];
    let kmax = top.iter().map(|p| p.1).fold(0.0, f64::max);
    let kmin = top.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let mut b_ok = true;
    for i in 0..rows.len() {
        for j in 0..rows.len() {
            let (r1, r2) = (&rows[i], &rows[j]);
            if r1.h <= r2.h && i != j {
                let q = r1.h / r2.h;
                let r = r1.b_h / r2.b_h;
                let lo = q.powf((1.0 - alpha) / (2.0 - alpha));
                let hi = (1.0 / q).powf(1.0 / (2.0 - alpha));
                if r < lo * (1.0 - 1e-12) || r > hi * (1.0 + 1e-12) {
                    b_ok = false;
                }
            }
        }
    }
    let tangential = ScalingReport::new(
        "tangential_extent",
        rows.iter().map(|r| (r.h, r.tangential_extent)).collect(),
        0.5,
        SLOPE_TOL,
    );
    let normal = ScalingReport::new(
        "normal_extent",
        rows.iter().map(|r| (r.h, r.normal_extent)).collect(),
        1.0 / (2.0 - alpha),
        SLOPE_TOL,
    );
    Ok(LocalizationReport {
        alpha,
        base_point: x0.to_vec(),
        plane,
        rows,
        excluded,
        tangential,
        normal,
        sandwich,
        sandwich_spread: kmax / kmin,
        b_bounds_hold: b_ok,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LiouvilleReport {
    pub alpha: f64,
    pub spacing: f64,
    pub band: (f64, f64),
    pub nodes: usize,
    /// `max |MA(U₀) − x_n^{−α}|·x_n^{α}`
    pub residual: f64,
    /// `(t, max_{|x'|≤1/2} |U₀(x', t) − ½|x'|²|)` for `t → 0`.
    pub trace_samples: Vec<(f64, f64)>,
    pub trace_converges: bool,
}

/// Samples `U₀` on a strip `|x'| < 1/2`, `0 < x_n < band.1 + 1/4` and applies
/// the monotone operator at the nodes with `x_n ∈ band`.
pub fn liouville_residual(alpha: f64, spacing: f64, band: (f64, f64)) -> Result<LiouvilleReport> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::IllPosed { alpha });
    }
    if !(band.0 > 0.0 && band.1 > band.0) {
        return Err(Error::Argument("the band must lie strictly above x_n = 0".into()));
    }
    let d = DomainSpec::graph(2, GraphProfile::flat(), 0.5, band.1 + 0.25, 0.25)?;
    let disc = default_disc(&d, spacing, 1)?;
    let u = GridFunction::from_fn(&disc, |x| u0_value(alpha, x));
    let mut worst = 0.0f64;
    let mut nodes = 0;
    for i in 0..disc.len() {
        let x = disc.grid.point(i);
        if x[1] < band.0 || x[1] > band.1 || x[0].abs() > 0.25 {
            continue;
        }
        let target = x[1].powf(-alpha);
        let r = (ma_monotone(&u, i)? - target).abs() / target;
        worst = worst.max(r);
        nodes += 1;
    }
    let trace_samples: Vec<(f64, f64)> = (2..12)
        .map(|k| {
            let t = 0.5f64.powi(k);
            let e = (0..=64)
                .map(|j| {
                    let x1 = -0.5 + j as f64 / 64.0;
                    (u0_value(alpha, &[x1, t]) - 0.5 * x1 * x1).abs()
                })
                .fold(0.0, f64::max);
            (t, e)
        })
        .collect();
    let trace_converges = trace_samples.windows(2).all(|w| w[1].1 < w[0].1) && trace_samples.last().unwrap().1 < 1e-3;
    Ok(LiouvilleReport { alpha, spacing, band, nodes, residual: worst, trace_samples, trace_converges })
}

#[derive(Clone, Debug, Serialize)]
pub struct ExpansionReport {
    pub alpha: f64,
    /// Normal slope of the supporting plane from the fit.
    pub slope: f64,
    /// Raw coefficient of `t^{2−α}` in `u(0,t)`.
    pub a_raw: f64,
    /// Tangential Hessian of `(u − ℓ)|∂Ω` at 0.
    pub m: Vec<Vec<f64>>,
    pub f0: f64,
    /// `λ` of the normalization `ũ(y) = u(M^{−1/2}y', λ y_n)`.
    pub lambda: f64,
    pub a_hat: f64,
    pub predicted: f64,
    pub relative_error: f64,
    pub a_within_10_percent: bool,
    pub fit_range: (f64, f64),
    pub fit_points: usize,
    /// `(h, η(h))` for the pinch `(1−η)S_h(U₀) ⊂ S_h(ũ) ⊂ (1+η)S_h(U₀)`.
    pub eta: Vec<(f64, f64)>,
    pub eta_nonincreasing: bool,
}

impl ExpansionReport {
    pub fn pass(&self) -> bool {
        self.a_within_10_percent && self.eta_nonincreasing
    }
}

fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let e = m.clone().symmetric_eigen();
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(|l| l.max(0.0).sqrt()));
    &e.eigenvectors * d * e.eigenvectors.transpose()
}

/// Regresses `u(0,t)` along the normal through the boundary point `0`
/// (inner normal `e_n`), normalizes by `D = diag(M^{−1/2}, λ)` and measures the
/// pinch against `S_h(U₀)`.
pub fn tangential_expansion_experiment(
    u: &GridFunction,
    problem: &ProblemSpec,
    heights: &Heights,
    opts: &SectionOptions,
) -> Result<ExpansionReport> {
    let alpha = problem.alpha;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Experiment(format!("the tangential expansion needs alpha in (0,1), got {alpha}")));
    }
    let disc = &u.disc;
    let n = disc.dim();
    let m1 = n - 1;
    let origin = vec![0.0; n];
    let frame = problem.domain.boundary_frame(&origin)?;
    if (frame.normal[n - 1] - 1.0).abs() > 1e-9 {
        return Err(Error::Experiment("the inner normal at 0 must be e_n".into()));
    }
    let dx = disc.spacing();
    let (tmin, tmax) = (4.0 * dx, 0.5 * problem.domain.rho);
    if tmax / tmin < 8.0 {
        return Err(Error::Experiment(format!(
            "normal range [{tmin:.3e}, {tmax:.3e}] spans fewer than three octaves"
        )));
    }
    let phi = &problem.boundary;
    let phi0 = phi.eval(&origin);
    let (mut ts, mut qs) = (Vec::new(), Vec::new());
    for i in 0..disc.len() {
        let x = disc.grid.point(i);
        if x[..m1].iter().all(|c| c.abs() < 1e-12 * (1.0 + dx)) && x[n - 1] >= tmin && x[n - 1] <= tmax {
            ts.push(x[n - 1]);
            qs.push((u.values[i] - phi0) / x[n - 1]);
        }
    }
    if ts.len() < 8 {
        return Err(Error::Experiment("the normal line through 0 has too few nodes".into()));
    }
    let fit = quotient_fit(&ts, &qs, alpha)?;
    let (p, a_raw) = (fit[0], fit[1]);
    let dphi = phi.grad(&origin);
    let hphi = phi.hess(&origin);
    let jet = problem.domain.lower_graph(&vec![0.0; m1]).ok_or_else(|| Error::Geometry("no lower graph at 0".into()))?;
    let m = DMatrix::from_fn(m1, m1, |i, j| hphi[(i, j)] + (dphi[n - 1] - p) * jet.hess[(i, j)]);
    let det_m = m.determinant();
    if !(det_m > 0.0) {
        return Err(Error::Experiment(format!("tangential Hessian at 0 is not positive definite (det {det_m:.3e})")));
    }
    let f0 = problem.scale.eval(&origin);
    let lambda = (det_m / f0).powf(1.0 / (2.0 - alpha));
    let a_hat = a_raw * det_m / f0;
    let predicted = 1.0 / ((2.0 - alpha) * (1.0 - alpha));
    let relative_error = (a_hat - predicted).abs() / predicted;

    // pinch in normalized coordinates y' = M^{1/2}x', y_n = x_n/λ
    let mut slope = dphi.clone();
    slope[n - 1] = p;
    let plane = Plane { base: origin.clone(), value: phi0, slope };
    let (used, _) = {
        let hs = match heights {
            Heights::List(h) => h.clone(),
            Heights::Auto => (0..MAX_OCTAVES).map(|k| 0.5f64.powi(k as i32)).collect(),
        };
        let mut used = Vec::new();
        for h in hs {
            let sec = section_with_plane(u, plane.clone(), Some(&frame), h, opts)?;
            if sec.resolved && !sec.truncated {
                used.push(h);
            } else if !sec.resolved && !used.is_empty() {
                break;
            }
        }
        (used, ())
    };
    let msqrt = sym_sqrt(&m);
    let k = predicted;
    let tau = |y: &[f64], h: f64| -> f64 {
        // smallest τ with Ũ₀(y/τ) < h; Ũ₀(y/τ) is decreasing in τ
        let yt2: f64 = y[..m1].iter().map(|v| v * v).sum();
        let yn = y[m1].max(0.0);
        let g = |t: f64| 0.5 * yt2 / (t * t) + k * (yn / t).powf(2.0 - alpha) - h;
        let (mut lo, mut hi) = (1e-6, 1.0);
        while g(hi) >= 0.0 {
            hi *= 2.0;
        }
        if g(lo) < 0.0 {
            return lo;
        }
        for _ in 0..80 {
            let mid = (lo * hi).sqrt();
            if g(mid) >= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    };
    let mut eta = Vec::new();
    for &h in &used {
        let sec = section_with_plane(u, plane.clone(), Some(&frame), h, opts)?;
        let mut inside = vec![false; disc.len()];
        for &i in &sec.members {
            inside[i] = true;
        }
        let (mut out, mut inn) = (0.0f64, 0.0f64);
        let reach = 4.0 * sec.tangential_extent.max(sec.normal_extent);
        for i in 0..disc.len() {
            let x = disc.grid.point(i);
            if norm(x) > reach {
                continue;
            }
            let xt = nalgebra::DVector::from_column_slice(&x[..m1]);
            let yt = &msqrt * xt;
            let mut y: Vec<f64> = yt.iter().cloned().collect();
            y.push(x[n - 1] / lambda);
            let t = tau(&y, h);
            if inside[i] {
                out = out.max(t - 1.0);
            } else {
                inn = inn.max(1.0 - t);
            }
        }
        eta.push((h, out.max(inn).max(0.0)));
    }
    let eta_nonincreasing = eta.len() >= 2 && eta.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12);
    Ok(ExpansionReport {
        alpha,
        slope: p,
        a_raw,
        m: (0..m1).map(|i| (0..m1).map(|j| m[(i, j)]).collect()).collect(),
        f0,
        lambda,
        a_hat,
        predicted,
        relative_error,
        a_within_10_percent: relative_error <= 0.1,
        fit_range: (tmin, tmax),
        fit_points: ts.len(),
        eta,
        eta_nonincreasing,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct MaxSectionPoint {
    pub y0: Vec<f64>,
    pub d: f64,
    pub hbar: f64,
    pub m: f64,
    pub x0: Vec<f64>,
    /// `|∇_{x'}u(y₀) − ∇_{x'}φ(0)|` in units of the spacing.
    pub tangential_gradient_gap: f64,
    /// Measured `c`, `C` of the box sandwich.
    pub box_c: f64,
    pub box_cc: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LogLaw {
    /// `(−log h̄, |M|^n)` sorted by the first coordinate.
    pub pairs: Vec<(f64, f64)>,
    pub increasing: bool,
    pub slope: f64,
    pub lower_offset: f64,
    pub upper_offset: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MaxSectionReport {
    pub alpha: f64,
    pub beta: f64,
    pub points: Vec<MaxSectionPoint>,
    pub excluded: Vec<(f64, String)>,
    pub m_exponent: Option<ScalingReport>,
    pub d_exponent: Option<ScalingReport>,
    pub max_tangential_gradient_gap: f64,
    pub log_law: Option<LogLaw>,
}

impl MaxSectionReport {
    pub fn pass(&self) -> bool {
        match (&self.m_exponent, &self.d_exponent, &self.log_law) {
            (Some(m), Some(d), _) => m.pass && d.pass,
            (_, _, Some(l)) => l.increasing,
            _ => false,
        }
    }
}

/// Maximal interior sections centred at `y₀ = d e_n` for the given
/// distances, tangent near the boundary point 0 (inner normal `e_n`).
pub fn maximal_section_experiment(
    u: &GridFunction,
    phi: &BoundaryData,
    alpha: f64,
    distances: &[f64],
) -> Result<MaxSectionReport> {
    if !(1.0..2.0).contains(&alpha) {
        return Err(Error::Experiment(format!("maximal sections need alpha in [1,2), got {alpha}")));
    }
    let disc = &u.disc;
    let n = disc.dim();
    let dx = disc.spacing();
    let beta = (n as f64 + alpha - 1.0) / n as f64;
    let origin = vec![0.0; n];
    let dphi = phi.grad(&origin);
    let mut points = Vec::new();
    let mut excluded = Vec::new();
    for &d in distances {
        let mut y = vec![0.0; n];
        y[n - 1] = d;
        let Some(node) = disc.grid.nearest_node(&y) else {
            excluded.push((d, "no grid node".into()));
            continue;
        };
        let y0 = disc.grid.point(node).to_vec();
        let ms = maximal_interior_section(u, phi, &y0)?;
        if norm(&ms.x0) > 3.0 * dx {
            excluded.push((d, format!("tangency at {:?} drifted more than 3 cells", ms.x0)));
            continue;
        }
        let gap = (0..n - 1).map(|k| (ms.gradient[k] - dphi[k]).powi(2)).sum::<f64>().sqrt() / dx;
        let sec = section(u, phi, &y0, ms.hbar, &SectionOptions::default())?;
        let scale = ms.hbar.powf(1.0 / (2.0 - beta));
        let mut inside = vec![false; disc.len()];
        for &i in &sec.members {
            inside[i] = true;
        }
        let (mut cmax, mut cmin) = (0.0f64, f64::INFINITY);
        for i in 0..disc.len() {
            let r = sub(disc.grid.point(i), &y0);
            let e = r[..n - 1].iter().map(|v| v * v).sum::<f64>() + r[n - 1].abs();
            if inside[i] {
                cmax = cmax.max(e);
            } else {
                cmin = cmin.min(e);
            }
        }
        points.push(MaxSectionPoint {
            y0: y0.clone(),
            d: problem_distance(disc, &y0)?,
            hbar: ms.hbar,
            m: ms.m,
            x0: ms.x0,
            tangential_gradient_gap: gap,
            box_c: cmin / scale,
            box_cc: cmax / scale,
        });
    }
    let max_gap = points.iter().map(|p| p.tangential_gradient_gap).fold(0.0, f64::max);
    let (m_exponent, d_exponent, log_law) = if alpha > 1.0 {
        let mp = points.iter().map(|p| (p.hbar, p.m.max(1.0))).collect();
        let dp = points.iter().map(|p| (p.hbar, p.d)).collect();
        (
            Some(ScalingReport::new("max(M,1)", mp, (1.0 - beta) / (2.0 - beta), SLOPE_TOL)),
            Some(ScalingReport::new("d(y0)", dp, 1.0 / (2.0 - beta), SLOPE_TOL)),
            None,
        )
    } else {
        let mut pairs: Vec<(f64, f64)> = points.iter().map(|p| (-p.hbar.ln(), p.m.abs().powi(n as i32))).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        (None, None, Some(log_envelopes(pairs)))
    };
    Ok(MaxSectionReport { alpha, beta, points, excluded, m_exponent, d_exponent, max_tangential_gradient_gap: max_gap, log_law })
}

fn problem_distance(disc: &crate::masolve::Discretization, y: &[f64]) -> Result<f64> {
    disc.domain.distance_to_boundary(y)
}

fn log_envelopes(pairs: Vec<(f64, f64)>) -> LogLaw {
    let increasing = pairs.len() >= 2 && pairs.windows(2).all(|w| w[1].1 > w[0].1);
    let k = pairs.len() as f64;
    let (sx, sy) = pairs.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / k, sy / k);
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let offsets: Vec<f64> = pairs.iter().map(|p| p.1 - slope * p.0).collect();
    LogLaw {
        increasing,
        slope,
        lower_offset: offsets.iter().cloned().fold(f64::INFINITY, f64::min),
        upper_offset: offsets.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        pairs,
    }
}


/// Closed-form section extents of `U₀`: `(√(2h), ((2−α)(1−α)h)^{1/(2−α)})`.
pub fn u0_extents(alpha: f64, h: f64) -> (f64, f64) {
    ((2.0 * h).sqrt(), ((2.0 - alpha) * (1.0 - alpha) * h).powf(1.0 / (2.0 - alpha)))
}

/// Localization fits on the closed-form extents of `U₀` (no grid).
pub fn analytic_localization(alpha: f64, heights: &[f64]) -> (ScalingReport, ScalingReport) {
    let ext: Vec<(f64, (f64, f64))> = heights.iter().map(|&h| (h, u0_extents(alpha, h))).collect();
    (
        ScalingReport::new("tangential_extent", ext.iter().map(|e| (e.0, e.1 .0)).collect(), 0.5, 1e-3),
        ScalingReport::new("normal_extent", ext.iter().map(|e| (e.0, e.1 .1)).collect(), 1.0 / (2.0 - alpha), 1e-3),
    )
}

#[cfg(test)]
mod tests;
