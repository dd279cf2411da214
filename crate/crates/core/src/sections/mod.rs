//! Sections `S_h(x₀)` of discrete solutions, their centers of mass and John
//! ellipsoids, the invariant `b_u(h)`, maximal interior sections and the
//! normalizing maps `A_h`, `F_h`.

mod john;

pub use john::{
    affine_rank, convex_hull_2d, directions, in_hull_2d, john_ellipsoid, john_shrink_ratio, Ellipsoid, MVEE_MAX_ITER,
    MVEE_TOL,
};

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::barriers::ScalarField;
use crate::domain::BoundaryFrame;
use crate::linalg::{dot, sub};
use crate::masolve::{gradient, BoundaryData, Discretization, GridFunction, Nbr};
use crate::{Error, Result};

/// How the normal slope of the supporting plane at a boundary point is
/// obtained from grid values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum SlopeMethod {
    /// Minimum over nodes of the normal difference quotient.
    MinQuotient,
    /// Least-squares fit of the per-layer minimal quotient by
    /// `p + a t^{1−α} + b t` (`p + a ln t + b t` at `α = 1`), extrapolated to
    /// `t = 0` and capped by the minimum quotient.
    Extrapolated { alpha: f64 },
}

#[derive(Clone, Copy, Debug)]
pub struct SectionOptions {
    pub slope: SlopeMethod,
    /// Nodes required across the normal extent for a section to count as resolved.
    pub min_normal_nodes: f64,
}

impl Default for SectionOptions {
    fn default() -> Self {
        SectionOptions { slope: SlopeMethod::MinQuotient, min_normal_nodes: 6.0 }
    }
}

impl SectionOptions {
    pub fn extrapolated(alpha: f64) -> Self {
        SectionOptions { slope: SlopeMethod::Extrapolated { alpha }, ..Default::default() }
    }
}

/// `ℓ(x) = value + slope·(x − base)`
#[derive(Clone, Debug, Serialize)]
pub struct Plane {
    pub base: Vec<f64>,
    pub value: f64,
    pub slope: Vec<f64>,
}

impl Plane {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.value + dot(&self.slope, &sub(x, &self.base))
    }
}

/// Supporting-plane gradient at the boundary point `x0`: tangential part
/// from `φ`, normal part from the grid values within `ρ` of `x0`.
pub fn supporting_slope(
    u: &GridFunction,
    phi: &BoundaryData,
    x0: &[f64],
    frame: &BoundaryFrame,
    method: SlopeMethod,
) -> Result<Vec<f64>> {
    let disc = &u.disc;
    let rho = disc.domain.rho;
    let dphi = phi.grad(x0);
    let mut tang = vec![0.0; x0.len()];
    for t in &frame.tangents {
        let c = dot(&dphi, t);
        for (a, x) in tang.iter_mut().zip(t) {
            *a += c * x;
        }
    }
    let phi0 = phi.eval(x0);
    let h = disc.spacing();
    let mut qmin = f64::INFINITY;
    // per-layer minima keyed by floor(s/Δ)
    let mut layers: Vec<(f64, f64)> = Vec::new();
    for i in 0..disc.len() {
        let x = disc.grid.point(i);
        let d = sub(x, x0);
        if dot(&d, &d) > rho * rho {
            continue;
        }
        let s = dot(&d, &frame.normal);
        if s <= 0.0 {
            continue;
        }
        let q = (u.values[i] - phi0 - dot(&tang, &d)) / s;
        qmin = qmin.min(q);
        let k = (s / h).floor() as usize;
        if k >= layers.len() {
            layers.resize(k + 1, (f64::NAN, f64::INFINITY));
        }
        if q < layers[k].1 {
            layers[k] = (s, q);
        }
    }
    if !qmin.is_finite() {
        return Err(Error::Geometry(format!("no nodes above the boundary point {x0:?}")));
    }
    let normal_slope = match method {
        SlopeMethod::MinQuotient => qmin,
        SlopeMethod::Extrapolated { alpha } => {
            let pts: Vec<(f64, f64)> = layers.iter().take(48).filter(|l| l.1.is_finite()).cloned().collect();
            if pts.len() < 6 {
                qmin
            } else {
                let ts: Vec<f64> = pts.iter().map(|p| p.0).collect();
                let qs: Vec<f64> = pts.iter().map(|p| p.1).collect();
                let fit = quotient_fit(&ts, &qs, alpha)?;
                fit[0].min(qmin)
            }
        }
    };
    Ok(tang.iter().zip(&frame.normal).map(|(t, n)| t + normal_slope * n).collect())
}

/// Least-squares fit of a normal difference quotient `q(t)` by
/// `p + a t^{1−α} + c t^{2(1−α)} + b t` (the `t^{2(1−α)}` term is dropped
/// when it nearly coincides with `t`; `ln t` replaces `t^{1−α}` at `α = 1`).
/// Returns the coefficients in that order, with `c = 0` when dropped.
pub fn quotient_fit(t: &[f64], q: &[f64], alpha: f64) -> Result<[f64; 4]> {
    let e = 1.0 - alpha;
    let second = alpha != 1.0 && (2.0 * e - 1.0).abs() > 0.1 && 2.0 * e > 0.0;
    let cols = if second { 4 } else { 3 };
    if t.len() < cols + 2 {
        return Err(Error::Geometry(format!("{} points are too few for the quotient fit", t.len())));
    }
    let a = DMatrix::from_fn(t.len(), cols, |r, c| {
        let t = t[r];
        match c {
            0 => 1.0,
            1 if alpha == 1.0 => t.ln(),
            1 => t.powf(e),
            2 => t,
            _ => t.powf(2.0 * e),
        }
    });
    let b = DVector::from_column_slice(q);
    let f = a.svd(true, true).solve(&b, 1e-14).map_err(|e| Error::Geometry(e.to_string()))?;
    Ok([f[0], f[1], if second { f[3] } else { 0.0 }, f[2]])
}

#[derive(Clone, Debug, Serialize)]
pub struct Section {
    pub base_point: Vec<f64>,
    pub height: f64,
    pub plane: Plane,
    pub members: Vec<usize>,
    /// Members with a stencil neighbour on the boundary.
    pub boundary_part: Vec<usize>,
    /// Inner normal at a boundary base point, `e_n` otherwise.
    pub normal: Vec<f64>,
    pub tangential_extent: f64,
    pub normal_extent: f64,
    pub truncated: bool,
    pub resolved: bool,
    #[serde(skip)]
    pub disc: Option<Arc<Discretization>>,
}

impl Section {
    pub fn points(&self) -> Vec<Vec<f64>> {
        let disc = self.disc.as_ref().expect("grid section");
        self.members.iter().map(|&i| disc.grid.point(i).to_vec()).collect()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Members with a non-member axis neighbour (contains all hull vertices).
    pub fn outer_points(&self) -> Vec<Vec<f64>> {
        let disc = self.disc.as_ref().expect("grid section");
        let mut inside = vec![false; disc.len()];
        for &i in &self.members {
            inside[i] = true;
        }
        self.members
            .iter()
            .filter(|&&i| {
                (0..disc.dim()).any(|a| {
                    (0..2).any(|s| match disc.neighbor(i, a, s) {
                        Nbr::Node(j) => !inside[j],
                        Nbr::Boundary(_) => true,
                    })
                })
            })
            .map(|&i| disc.grid.point(i).to_vec())
            .collect()
    }

    /// Nodes in the convex hull of the members that are not members (2D).
    pub fn hull_defect(&self) -> Option<usize> {
        let disc = self.disc.as_ref()?;
        if disc.dim() != 2 || self.members.len() < 3 {
            return None;
        }
        let hull = convex_hull_2d(&self.outer_points());
        if hull.len() < 3 {
            return Some(0);
        }
        let mut inside = vec![false; disc.len()];
        for &i in &self.members {
            inside[i] = true;
        }
        let tol = 1e-9 * disc.spacing();
        Some((0..disc.len()).filter(|&i| !inside[i] && in_hull_2d(&hull, disc.grid.point(i), tol)).count())
    }
}

/// Plane at `x0`: supporting plane at a boundary point, the discrete
/// gradient plane at an interior node.
pub fn base_plane(u: &GridFunction, phi: &BoundaryData, x0: &[f64], opts: &SectionOptions) -> Result<(Plane, Option<BoundaryFrame>)> {
    let disc = &u.disc;
    let domain = &disc.domain;
    let scale = domain.diameter();
    if domain.boundary_residual(x0) <= 1e-9 * scale {
        let frame = domain.boundary_frame(x0)?;
        let slope = supporting_slope(u, phi, x0, &frame, opts.slope)?;
        return Ok((Plane { base: x0.to_vec(), value: phi.eval(x0), slope }, Some(frame)));
    }
    let node = disc
        .grid
        .nearest_node(x0)
        .filter(|&i| crate::linalg::norm(&sub(disc.grid.point(i), x0)) <= 1e-9 * scale)
        .ok_or_else(|| Error::Argument(format!("interior base point {x0:?} is not a grid node")))?;
    let slope = gradient(u, node)?;
    Ok((Plane { base: x0.to_vec(), value: u.values[node], slope }, None))
}

pub fn section(u: &GridFunction, phi: &BoundaryData, x0: &[f64], h: f64, opts: &SectionOptions) -> Result<Section> {
    let (plane, frame) = base_plane(u, phi, x0, opts)?;
    section_with_plane(u, plane, frame.as_ref(), h, opts)
}

/// Nodes with `u < ℓ + h`.
pub fn section_with_plane(
    u: &GridFunction,
    plane: Plane,
    frame: Option<&BoundaryFrame>,
    h: f64,
    opts: &SectionOptions,
) -> Result<Section> {
    if !(h > 0.0) {
        return Err(Error::Argument(format!("section height must be positive, got {h}")));
    }
    let disc = u.disc.clone();
    let n = disc.dim();
    let x0 = plane.base.clone();
    let normal = frame.map(|f| f.normal.clone()).unwrap_or_else(|| {
        let mut e = vec![0.0; n];
        e[n - 1] = 1.0;
        e
    });
    let members: Vec<usize> = (0..disc.len()).filter(|&i| u.values[i] < plane.eval(disc.grid.point(i)) + h).collect();
    let boundary_part: Vec<usize> = members.iter().cloned().filter(|&i| disc.boundary_adjacent(i)).collect();
    let (mut tmax, mut nmax) = (0.0f64, 0.0f64);
    for &i in &members {
        let d = sub(disc.grid.point(i), &x0);
        let s = dot(&d, &normal);
        let tang = (dot(&d, &d) - s * s).max(0.0).sqrt();
        tmax = tmax.max(tang);
        nmax = nmax.max(s.abs());
    }
    let domain = &disc.domain;
    let truncated = if frame.is_some() {
        nmax >= domain.rho
            || boundary_part.iter().any(|&i| {
                let nd = disc.stencil.dirs.len();
                (0..nd).any(|d| {
                    (0..2).any(|s| match disc.neighbor(i, d, s) {
                        Nbr::Boundary(b) => !domain.on_lower_graph(disc.boundary_point(b)),
                        Nbr::Node(_) => false,
                    })
                })
            })
    } else {
        // the sublevel set continues past a boundary crossing
        let slack = 1e-12 * (1.0 + h);
        boundary_part.iter().any(|&i| {
            let nd = disc.stencil.dirs.len();
            (0..nd).any(|d| {
                (0..2).any(|s| match disc.neighbor(i, d, s) {
                    Nbr::Boundary(b) => u.trace[b] < plane.eval(disc.boundary_point(b)) + h - slack,
                    Nbr::Node(_) => false,
                })
            })
        })
    };
    let resolved = nmax >= opts.min_normal_nodes * disc.spacing();
    Ok(Section {
        base_point: x0,
        height: h,
        plane,
        members,
        boundary_part,
        normal,
        tangential_extent: tmax,
        normal_extent: nmax,
        truncated,
        resolved,
        disc: Some(disc),
    })
}

/// Node average (uniform cells).
pub fn center_of_mass(sec: &Section) -> Result<Vec<f64>> {
    if sec.members.is_empty() {
        return Err(Error::Geometry("empty section".into()));
    }
    let pts = sec.points();
    let n = pts[0].len();
    let mut c = vec![0.0; n];
    for p in &pts {
        for a in 0..n {
            c[a] += p[a];
        }
    }
    Ok(c.into_iter().map(|x| x / pts.len() as f64).collect())
}

/// `d_h`: normal coordinate of the center of mass relative to the base point.
pub fn normal_depth(sec: &Section) -> Result<f64> {
    let c = center_of_mass(sec)?;
    Ok(dot(&sub(&c, &sec.base_point), &sec.normal))
}

/// MVEE of the section's node set.
pub fn section_ellipsoid(sec: &Section) -> Result<Ellipsoid> {
    john_ellipsoid(&sec.outer_points())
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BValue {
    pub h: f64,
    pub value: f64,
    pub truncated: bool,
}

/// `b(h) = h^{−1/(2−α)} sup_{S_h} x_n` (normal coordinate from the base point).
pub fn b_of_h(sec: &Section, alpha: f64) -> Result<BValue> {
    if sec.members.is_empty() {
        return Err(Error::Geometry("empty section".into()));
    }
    let disc = sec.disc.as_ref().expect("grid section");
    let sup = sec
        .members
        .iter()
        .map(|&i| dot(&sub(disc.grid.point(i), &sec.base_point), &sec.normal))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(BValue { h: sec.height, value: sec.height.powf(-1.0 / (2.0 - alpha)) * sup, truncated: sec.truncated })
}

/// `b(h)` of an analytic convex function `w = u − ℓ` with `w(0) = 0`,
/// minimizing over `x' ∈ [−reach, reach]^{n−1}` by nested golden sections.
pub fn b_of_h_analytic<F: Fn(&[f64]) -> f64>(w: F, dim: usize, alpha: f64, h: f64, reach: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Argument("height must be positive".into()));
    }
    let m = |xn: f64| -> f64 {
        let mut x = vec![0.0; dim];
        x[dim - 1] = xn;
        min_tangential(&w, &mut x, 0, reach)
    };
    let mut hi = reach.max(1e-3);
    let mut grow = 0;
    while m(hi) < h {
        hi *= 2.0;
        grow += 1;
        if grow > 200 {
            return Err(Error::Geometry("sublevel set is unbounded".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if m(mid) < h {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(h.powf(-1.0 / (2.0 - alpha)) * lo)
}

fn min_tangential<F: Fn(&[f64]) -> f64>(w: &F, x: &mut Vec<f64>, k: usize, reach: f64) -> f64 {
    let dim = x.len();
    if k + 1 == dim {
        return w(x);
    }
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (-reach, reach);
    let eval = |t: f64, x: &mut Vec<f64>| {
        x[k] = t;
        min_tangential(w, x, k + 1, reach)
    };
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (eval(c, x), eval(d, x));
    for _ in 0..160 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = eval(c, x);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = eval(d, x);
        }
        if b - a <= 1e-15 * reach {
            break;
        }
    }
    fc.min(fd)
}

/// `A x = x − ν x_n`, `ν_n = 0`.
#[derive(Clone, Debug, Serialize)]
pub struct SlidingTransform {
    pub nu: Vec<f64>,
}

impl SlidingTransform {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let xn = x[n - 1];
        (0..n).map(|i| if i < n - 1 { x[i] - self.nu[i] * xn } else { xn }).collect()
    }

    pub fn inverse(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let xn = x[n - 1];
        (0..n).map(|i| if i < n - 1 { x[i] + self.nu[i] * xn } else { xn }).collect()
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.nu.len();
        let mut m = DMatrix::identity(n, n);
        for i in 0..n - 1 {
            m[(i, n - 1)] = -self.nu[i];
        }
        m
    }
}

/// Section points in boundary-frame coordinates `(x', x_n)` relative to the
/// base point, for a section at a boundary point.
pub fn frame_coordinates(sec: &Section, frame: &BoundaryFrame) -> Vec<Vec<f64>> {
    sec.points()
        .iter()
        .map(|p| {
            let (mut t, s) = frame.decompose(p);
            t.push(s);
            t
        })
        .collect()
}

/// `ν = (x*)'/d_h` from frame coordinates; returns the transform, the
/// transformed points and their center of mass.
pub fn sliding_normalize(points: &[Vec<f64>]) -> Result<(SlidingTransform, Vec<Vec<f64>>, Vec<f64>)> {
    if points.is_empty() {
        return Err(Error::Geometry("empty section".into()));
    }
    let n = points[0].len();
    let mut c = vec![0.0; n];
    for p in points {
        for a in 0..n {
            c[a] += p[a] / points.len() as f64;
        }
    }
    let dh = c[n - 1];
    if !(dh > 0.0) {
        return Err(Error::Geometry(format!("center of mass depth d_h = {dh} is not positive")));
    }
    let mut nu: Vec<f64> = c[..n - 1].iter().map(|x| x / dh).collect();
    nu.push(0.0);
    let a = SlidingTransform { nu };
    let moved: Vec<Vec<f64>> = points.iter().map(|p| a.apply(p)).collect();
    let center = a.apply(&c);
    Ok((a, moved, center))
}

/// `F_h = diag(h^{1/2},…,h^{1/2},h^{1/(2−α)})`
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DiagonalScaling {
    pub h: f64,
    pub alpha: f64,
}

impl DiagonalScaling {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n).map(|i| x[i] * if i < n - 1 { self.h.sqrt() } else { self.h.powf(1.0 / (2.0 - self.alpha)) }).collect()
    }

    pub fn inverse(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n).map(|i| x[i] / if i < n - 1 { self.h.sqrt() } else { self.h.powf(1.0 / (2.0 - self.alpha)) }).collect()
    }
}

/// `v(x) = u(F_h x)/h`
pub struct Rescaled<'a> {
    pub field: &'a dyn ScalarField,
    pub scaling: DiagonalScaling,
}

pub fn diagonal_rescale(field: &dyn ScalarField, h: f64, alpha: f64) -> Rescaled<'_> {
    Rescaled { field, scaling: DiagonalScaling { h, alpha } }
}

impl ScalarField for Rescaled<'_> {
    fn value(&self, p: &[f64]) -> Result<f64> {
        Ok(self.field.value(&self.scaling.apply(p))? / self.scaling.h)
    }
    fn label(&self) -> String {
        format!("{} rescaled at h = {}", self.field.label(), self.scaling.h)
    }
}

/// A closed-form function as a [`ScalarField`].
pub struct Analytic<F: Fn(&[f64]) -> f64> {
    pub f: F,
    pub name: String,
}

impl<F: Fn(&[f64]) -> f64> ScalarField for Analytic<F> {
    fn value(&self, p: &[f64]) -> Result<f64> {
        Ok((self.f)(p))
    }
    fn label(&self) -> String {
        self.name.clone()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MaximalSection {
    pub y0: Vec<f64>,
    pub hbar: f64,
    /// Boundary point where the section touches.
    pub x0: Vec<f64>,
    /// `−∂_n u(y₀)`
    pub m: f64,
    pub gradient: Vec<f64>,
}

/// Largest `S_h(y₀)` inside `Ω`: `h̄ = min_z φ(z) − u(y₀) − ∇u(y₀)·(z − y₀)`
/// over boundary crossings of the grid and dense boundary samples.
pub fn maximal_interior_section(u: &GridFunction, phi: &BoundaryData, y0: &[f64]) -> Result<MaximalSection> {
    let disc = &u.disc;
    let n = disc.dim();
    let scale = disc.domain.diameter();
    let node = disc
        .grid
        .nearest_node(y0)
        .filter(|&i| crate::linalg::norm(&sub(disc.grid.point(i), y0)) <= 1e-9 * scale)
        .ok_or_else(|| Error::Argument(format!("y0 = {y0:?} is not a grid node")))?;
    let grad = gradient(u, node)?;
    let uy = u.values[node];
    let gap = |z: &[f64], v: f64| v - uy - dot(&grad, &sub(z, y0));
    let mut best = (f64::INFINITY, Vec::new());
    for b in 0..disc.n_boundary() {
        let z = disc.boundary_point(b);
        let g = gap(z, u.trace[b]);
        if g < best.0 {
            best = (g, z.to_vec());
        }
    }
    for z in disc.domain.sample_boundary(1 << 14) {
        let g = gap(&z, phi.eval(&z));
        if g < best.0 {
            best = (g, z);
        }
    }
    if best.0 < 0.0 {
        return Err(Error::ConvexityViolation { hbar: best.0 });
    }
    Ok(MaximalSection { y0: y0.to_vec(), hbar: best.0, x0: best.1, m: -grad[n - 1], gradient: grad })
}

/// One row of a boundary-section sweep.
#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub h: f64,
    pub tangential_extent: f64,
    pub normal_extent: f64,
    pub d_h: f64,
    pub b_h: f64,
    pub axes: Vec<f64>,
    pub members: usize,
    pub truncated: bool,
    pub resolved: bool,
}

pub fn sweep(
    u: &GridFunction,
    phi: &BoundaryData,
    x0: &[f64],
    heights: &[f64],
    alpha: f64,
    opts: &SectionOptions,
) -> Result<Vec<SweepRow>> {
    let (plane, frame) = base_plane(u, phi, x0, opts)?;
    let mut rows = Vec::with_capacity(heights.len());
    for &h in heights {
        let sec = section_with_plane(u, plane.clone(), frame.as_ref(), h, opts)?;
        if sec.is_empty() {
            rows.push(SweepRow {
                h,
                tangential_extent: 0.0,
                normal_extent: 0.0,
                d_h: 0.0,
                b_h: 0.0,
                axes: vec![],
                members: 0,
                truncated: sec.truncated,
                resolved: false,
            });
            continue;
        }
        let axes = section_ellipsoid(&sec).map(|e| e.semi_axes()).unwrap_or_default();
        rows.push(SweepRow {
            h,
            tangential_extent: sec.tangential_extent,
            normal_extent: sec.normal_extent,
            d_h: normal_depth(&sec)?,
            b_h: b_of_h(&sec, alpha)?.value,
            axes,
            members: sec.len(),
            truncated: sec.truncated,
            resolved: sec.resolved,
        });
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow], dim: usize) -> String {
    let mut s = String::from("h,tangential_extent,normal_extent,d_h,b_h");
    for k in 0..dim {
        s.push_str(&format!(",axis{}", k + 1));
    }
    s.push_str(",members,truncated\n");
    for r in rows {
        s.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.h, r.tangential_extent, r.normal_extent, r.d_h, r.b_h
        ));
        for k in 0..dim {
            match r.axes.get(k) {
                Some(a) => s.push_str(&format!(",{a:.16e}")),
                None => s.push(','),
            }
        }
        s.push_str(&format!(",{},{}\n", r.members, r.truncated));
    }
    s
}
