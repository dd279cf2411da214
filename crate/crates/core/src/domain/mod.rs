//! Convex model domains: distance to the boundary, inner normals, tangential
//! frames, ray exits, and the lower boundary graph `x_n = g(x')`.

mod grid;

pub use grid::{make_grid, make_grid_with, Grid, GridOptions};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::linalg::{dot, norm, orthonormal_complement, sub};
use crate::{Error, Result};

/// Convex radial profile `g(r) = curvature·r²/2 + quartic·r⁴` of a graph domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphProfile {
    pub curvature: f64,
    pub quartic: f64,
}

impl GraphProfile {
    pub fn flat() -> Self {
        Self { curvature: 0.0, quartic: 0.0 }
    }

    pub fn parabola(curvature: f64) -> Self {
        Self { curvature, quartic: 0.0 }
    }

    pub fn value(&self, r: f64) -> f64 {
        let r2 = r * r;
        0.5 * self.curvature * r2 + self.quartic * r2 * r2
    }

    pub fn slope(&self, r: f64) -> f64 {
        self.curvature * r + 4.0 * self.quartic * r * r * r
    }

    pub fn second(&self, r: f64) -> f64 {
        self.curvature + 12.0 * self.quartic * r * r
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DomainKind {
    /// The open interval `(lo, hi)`; one-dimensional oracle problems only.
    Interval { lo: f64, hi: f64 },
    /// Open ball (a disk in 2D).
    Disk { center: Vec<f64>, radius: f64 },
    /// Axis-aligned 2D ellipse.
    Ellipse { center: [f64; 2], semi_axes: [f64; 2] },
    /// `{|x'| < half_width, g(x') < x_n < height}` with radial convex `g`.
    Graph {
        profile: GraphProfile,
        half_width: f64,
        height: f64,
    },
}

/// Value, gradient and Hessian of the lower boundary graph at a point `x'`.
#[derive(Clone, Debug)]
pub struct GraphJet {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: DMatrix<f64>,
}

/// Inner unit normal and orthonormal tangent basis at a boundary point.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryFrame {
    pub base_point: Vec<f64>,
    pub normal: Vec<f64>,
    pub tangents: Vec<Vec<f64>>,
}

impl BoundaryFrame {
    /// Splits `x - x0` into tangential coordinates and the normal coordinate.
    pub fn decompose(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let d = sub(x, &self.base_point);
        let tang = self.tangents.iter().map(|t| dot(&d, t)).collect();
        (tang, dot(&d, &self.normal))
    }

    /// Inverse of [`BoundaryFrame::decompose`].
    pub fn compose(&self, tang: &[f64], normal: f64) -> Vec<f64> {
        let mut x = self.base_point.clone();
        for (t, c) in self.tangents.iter().zip(tang) {
            for (xi, ti) in x.iter_mut().zip(t) {
                *xi += c * ti;
            }
        }
        for (xi, ni) in x.iter_mut().zip(&self.normal) {
            *xi += normal * ni;
        }
        x
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum GraphFace {
    Bottom,
    Top,
    Side,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub rho: f64,
    pub dim: usize,
}

const NEWTON_TOL: f64 = 1e-12;
const FALLBACK_SAMPLES: usize = 1 << 12;

impl DomainSpec {
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(DomainKind::Interval { lo, hi }, (hi - lo) / 2.0, 1)
    }

    pub fn disk(center: Vec<f64>, radius: f64, rho: f64) -> Result<Self> {
        let dim = center.len();
        Self::new(DomainKind::Disk { center, radius }, rho, dim)
    }

    pub fn ellipse(center: [f64; 2], semi_axes: [f64; 2], rho: f64) -> Result<Self> {
        Self::new(DomainKind::Ellipse { center, semi_axes }, rho, 2)
    }

    pub fn graph(
        dim: usize,
        profile: GraphProfile,
        half_width: f64,
        height: f64,
        rho: f64,
    ) -> Result<Self> {
        Self::new(
            DomainKind::Graph { profile, half_width, height },
            rho,
            dim,
        )
    }

    pub fn new(kind: DomainKind, rho: f64, dim: usize) -> Result<Self> {
        let d = DomainSpec { kind, rho, dim };
        d.validate()?;
        Ok(d)
    }

    /// Checks parameter ranges, convexity of `g` and the interior-ball
    /// condition on boundary samples.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad("rho must be positive");
        }
        match &self.kind {
            DomainKind::Interval { lo, hi } => {
                if self.dim != 1 || !(hi > lo) {
                    return bad("interval needs dim = 1 and hi > lo");
                }
                return Ok(());
            }
            DomainKind::Disk { center, radius } => {
                if !(2..=3).contains(&self.dim) || center.len() != self.dim {
                    return bad("disk needs dim 2 or 3 and a matching center");
                }
                if !(*radius > 0.0) {
                    return bad("disk radius must be positive");
                }
            }
            DomainKind::Ellipse { semi_axes, .. } => {
                if self.dim != 2 {
                    return bad("ellipse domains are two-dimensional");
                }
                if !(semi_axes[0] > 0.0 && semi_axes[1] > 0.0) {
                    return bad("ellipse semi-axes must be positive");
                }
            }
            DomainKind::Graph { profile, half_width, height } => {
                if !(2..=3).contains(&self.dim) {
                    return bad("graph domains need dim 2 or 3");
                }
                if !(*half_width > 0.0 && *height > 0.0) {
                    return bad("graph half_width and height must be positive");
                }
                if profile.curvature < 0.0 || profile.quartic < 0.0 {
                    return bad("graph profile coefficients must be nonnegative (convex g)");
                }
                // Sampled midpoint convexity of g on its base.
                let l = *half_width;
                for i in 0..64 {
                    let a = -l + 2.0 * l * (i as f64) / 63.0;
                    let b = l - 2.0 * l * ((i * 7 % 64) as f64) / 63.0;
                    let m = 0.5 * (a + b);
                    if profile.value(m) > 0.5 * (profile.value(a) + profile.value(b)) + 1e-14 {
                        return bad("graph profile is not convex");
                    }
                }
            }
        }
        self.check_interior_balls()
    }

    fn check_interior_balls(&self) -> Result<()> {
        for z in self.sample_boundary(256) {
            if let DomainKind::Graph { half_width, .. } = &self.kind {
                // only the bottom face away from the side walls carries the ball condition
                let r = norm(&z[..self.dim - 1]);
                if self.graph_face(&z) != Some(GraphFace::Bottom) || r > half_width - 2.0 * self.rho {
                    continue;
                }
            }
            let frame = self.boundary_frame(&z)?;
            let centre: Vec<f64> = z.iter().zip(&frame.normal).map(|(a, n)| a + self.rho * n).collect();
            let d = if self.contains(&centre) { self.distance_to_boundary(&centre)? } else { 0.0 };
            if d < self.rho * (1.0 - 1e-9) {
                return Err(Error::InvalidParameter(format!(
                    "no interior ball of radius rho = {} touches the boundary at {:?}",
                    self.rho, z
                )));
            }
        }
        Ok(())
    }

    fn scale(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        norm(&sub(&hi, &lo)).max(1e-300)
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.kind {
            DomainKind::Interval { lo, hi } => (vec![*lo], vec![*hi]),
            DomainKind::Disk { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            DomainKind::Ellipse { center, semi_axes } => (
                vec![center[0] - semi_axes[0], center[1] - semi_axes[1]],
                vec![center[0] + semi_axes[0], center[1] + semi_axes[1]],
            ),
            DomainKind::Graph { half_width, height, .. } => {
                let mut lo = vec![-half_width; self.dim];
                let mut hi = vec![*half_width; self.dim];
                lo[self.dim - 1] = 0.0;
                hi[self.dim - 1] = *height;
                (lo, hi)
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        match &self.kind {
            DomainKind::Interval { lo, hi } => hi - lo,
            DomainKind::Disk { radius, .. } => 2.0 * radius,
            DomainKind::Ellipse { semi_axes, .. } => 2.0 * semi_axes[0].max(semi_axes[1]),
            DomainKind::Graph { .. } => self.scale(),
        }
    }

    /// Strict (open-set) membership.
    pub fn contains(&self, p: &[f64]) -> bool {
        match &self.kind {
            DomainKind::Interval { lo, hi } => *lo < p[0] && p[0] < *hi,
            DomainKind::Disk { center, radius } => norm(&sub(p, center)) < *radius,
            DomainKind::Ellipse { center, semi_axes } => {
                let u = (p[0] - center[0]) / semi_axes[0];
                let v = (p[1] - center[1]) / semi_axes[1];
                u * u + v * v < 1.0
            }
            DomainKind::Graph { profile, half_width, height } => {
                let n = self.dim;
                let r = norm(&p[..n - 1]);
                r < *half_width && profile.value(r) < p[n - 1] && p[n - 1] < *height
            }
        }
    }

    fn contains_closed(&self, p: &[f64]) -> bool {
        let tol = 1e-12 * self.scale();
        self.contains(p) || self.boundary_residual(p) <= tol
    }

    /// Euclidean distance to `∂Ω` of a point of the closed domain.
    pub fn distance_to_boundary(&self, p: &[f64]) -> Result<f64> {
        if p.len() != self.dim {
            return Err(Error::Argument(format!("point has dimension {}, domain {}", p.len(), self.dim)));
        }
        if !self.contains(p) {
            if self.contains_closed(p) {
                return Ok(0.0);
            }
            return Err(Error::DomainMembership { point: p.to_vec() });
        }
        Ok(match &self.kind {
            DomainKind::Interval { lo, hi } => (p[0] - lo).min(hi - p[0]),
            DomainKind::Disk { center, radius } => radius - norm(&sub(p, center)),
            DomainKind::Ellipse { center, semi_axes } => {
                ellipse_distance([p[0] - center[0], p[1] - center[1]], *semi_axes)
            }
            DomainKind::Graph { profile, half_width, height } => {
                let n = self.dim;
                let r = norm(&p[..n - 1]);
                let below = graph_epigraph_distance(profile, signed_radius(p), p[n - 1]);
                below.min(height - p[n - 1]).min(half_width - r)
            }
        })
    }

    /// Distance from `p` to the nearest boundary surface; zero on `∂Ω`.
    pub fn boundary_residual(&self, p: &[f64]) -> f64 {
        match &self.kind {
            DomainKind::Interval { lo, hi } => (p[0] - lo).abs().min((p[0] - hi).abs()),
            DomainKind::Disk { center, radius } => (norm(&sub(p, center)) - radius).abs(),
            DomainKind::Ellipse { center, semi_axes } => {
                let u = (p[0] - center[0]) / semi_axes[0];
                let v = (p[1] - center[1]) / semi_axes[1];
                let psi = u * u + v * v - 1.0;
                let gx = 2.0 * u / semi_axes[0];
                let gy = 2.0 * v / semi_axes[1];
                psi.abs() / (gx * gx + gy * gy).sqrt().max(1e-300)
            }
            DomainKind::Graph { .. } => self.graph_face_residual(p).0,
        }
    }

    fn graph_face_residual(&self, p: &[f64]) -> (f64, Option<GraphFace>) {
        let DomainKind::Graph { profile, half_width, height } = &self.kind else {
            return (f64::INFINITY, None);
        };
        let n = self.dim;
        let tol = 1e-9 * self.scale();
        let r = norm(&p[..n - 1]);
        let g = profile.value(r);
        let xn = p[n - 1];
        let mut best = (f64::INFINITY, None);
        let mut consider = |res: f64, face: GraphFace| {
            if res < best.0 {
                best = (res, Some(face));
            }
        };
        if r <= half_width + tol {
            consider((xn - g).abs() / (1.0 + profile.slope(r).powi(2)).sqrt(), GraphFace::Bottom);
            if g <= height + tol {
                consider((xn - height).abs(), GraphFace::Top);
            }
        }
        if xn >= profile.value(*half_width) - tol && xn <= height + tol {
            consider((r - half_width).abs(), GraphFace::Side);
        }
        best
    }

    fn graph_face(&self, p: &[f64]) -> Option<GraphFace> {
        self.graph_face_residual(p).1
    }

    /// True if `z` lies on the lower boundary graph `x_n = g(x')` (the bottom
    /// face for graph domains, the part below the centre for disks/ellipses).
    pub fn on_lower_graph(&self, z: &[f64]) -> bool {
        let tol = 1e-9 * self.scale();
        match &self.kind {
            DomainKind::Interval { lo, .. } => (z[0] - lo).abs() <= tol,
            DomainKind::Disk { center, .. } => {
                self.boundary_residual(z) <= tol && z[self.dim - 1] < center[self.dim - 1]
            }
            DomainKind::Ellipse { center, .. } => self.boundary_residual(z) <= tol && z[1] < center[1],
            DomainKind::Graph { .. } => {
                let (res, face) = self.graph_face_residual(z);
                res <= tol && face == Some(GraphFace::Bottom)
            }
        }
    }

    /// Inner unit normal and tangent frame at a boundary point.
    pub fn boundary_frame(&self, x0: &[f64]) -> Result<BoundaryFrame> {
        let tol = 1e-9 * self.scale();
        let residual = self.boundary_residual(x0);
        if x0.len() != self.dim || residual > tol {
            return Err(Error::NotOnBoundary { point: x0.to_vec(), residual });
        }
        let n = self.dim;
        let normal: Vec<f64> = match &self.kind {
            DomainKind::Interval { lo, hi } => {
                if (x0[0] - lo).abs() <= (x0[0] - hi).abs() {
                    vec![1.0]
                } else {
                    vec![-1.0]
                }
            }
            DomainKind::Disk { center, radius } => sub(center, x0).iter().map(|c| c / radius).collect(),
            DomainKind::Ellipse { center, semi_axes } => {
                let gx = -(x0[0] - center[0]) / (semi_axes[0] * semi_axes[0]);
                let gy = -(x0[1] - center[1]) / (semi_axes[1] * semi_axes[1]);
                let l = (gx * gx + gy * gy).sqrt();
                vec![gx / l, gy / l]
            }
            DomainKind::Graph { .. } => {
                let face = self.graph_face(x0).expect("residual check implies a face");
                match face {
                    GraphFace::Bottom => {
                        let jet = self.lower_graph(&x0[..n - 1]).expect("graph defined on its base");
                        let mut v: Vec<f64> = jet.grad.iter().map(|g| -g).collect();
                        v.push(1.0);
                        let l = norm(&v);
                        v.iter().map(|c| c / l).collect()
                    }
                    GraphFace::Top => {
                        let mut v = vec![0.0; n];
                        v[n - 1] = -1.0;
                        v
                    }
                    GraphFace::Side => {
                        let r = norm(&x0[..n - 1]);
                        let mut v: Vec<f64> = x0[..n - 1].iter().map(|c| -c / r).collect();
                        v.push(0.0);
                        v
                    }
                }
            }
        };
        let tangents = orthonormal_complement(&normal);
        Ok(BoundaryFrame { base_point: x0.to_vec(), normal, tangents })
    }

    /// Smallest `s > 0` with `p + s·v` on `∂Ω`, for interior `p`.
    pub fn ray_exit(&self, p: &[f64], v: &[f64]) -> Result<f64> {
        if !self.contains(p) {
            return Err(Error::DomainMembership { point: p.to_vec() });
        }
        let vv = dot(v, v);
        if vv == 0.0 {
            return Err(Error::Argument("ray direction is zero".into()));
        }
        Ok(match &self.kind {
            DomainKind::Interval { lo, hi } => {
                if v[0] > 0.0 {
                    (hi - p[0]) / v[0]
                } else {
                    (lo - p[0]) / v[0]
                }
            }
            DomainKind::Disk { center, radius } => {
                let q = sub(p, center);
                sphere_exit(&q, v, *radius)
            }
            DomainKind::Ellipse { center, semi_axes } => {
                let q = [(p[0] - center[0]) / semi_axes[0], (p[1] - center[1]) / semi_axes[1]];
                let w = [v[0] / semi_axes[0], v[1] / semi_axes[1]];
                sphere_exit(&q, &w, 1.0)
            }
            DomainKind::Graph { profile, half_width, height } => {
                let n = self.dim;
                let mut s_max = f64::INFINITY;
                if v[n - 1] > 0.0 {
                    s_max = s_max.min((height - p[n - 1]) / v[n - 1]);
                }
                let vt = &v[..n - 1];
                if dot(vt, vt) > 0.0 {
                    s_max = s_max.min(sphere_exit(&p[..n - 1], vt, *half_width));
                }
                let h = |s: f64| {
                    let xt: Vec<f64> = p[..n - 1].iter().zip(vt).map(|(a, b)| a + s * b).collect();
                    p[n - 1] + s * v[n - 1] - profile.value(norm(&xt))
                };
                if !s_max.is_finite() {
                    // purely downward ray: it must cross the graph
                    s_max = (p[n - 1] + 1.0) / (-v[n - 1]).max(1e-300);
                    while h(s_max) > 0.0 {
                        s_max *= 2.0;
                    }
                }
                if h(s_max) > 0.0 {
                    s_max
                } else {
                    // h(0) > 0 >= h(s_max) and h is concave along the ray: one crossing.
                    let (mut a, mut b) = (0.0, s_max);
                    for _ in 0..200 {
                        let m = 0.5 * (a + b);
                        if m <= a || m >= b {
                            break;
                        }
                        if h(m) > 0.0 {
                            a = m;
                        } else {
                            b = m;
                        }
                    }
                    0.5 * (a + b)
                }
            }
        })
    }

    /// Lower boundary graph `g` with derivatives, where it is defined.
    pub fn lower_graph(&self, xt: &[f64]) -> Option<GraphJet> {
        let m = self.dim - 1;
        if xt.len() != m {
            return None;
        }
        match &self.kind {
            DomainKind::Interval { lo, .. } => Some(GraphJet { value: *lo, grad: vec![], hess: DMatrix::zeros(0, 0) }),
            DomainKind::Disk { center, radius } => {
                let d = sub(xt, &center[..m]);
                let r2 = dot(&d, &d);
                if r2 >= radius * radius {
                    return None;
                }
                let s = (radius * radius - r2).sqrt();
                let grad: Vec<f64> = d.iter().map(|c| c / s).collect();
                let mut hess = DMatrix::identity(m, m) / s;
                for i in 0..m {
                    for j in 0..m {
                        hess[(i, j)] += d[i] * d[j] / (s * s * s);
                    }
                }
                Some(GraphJet { value: center[m] - s, grad, hess })
            }
            DomainKind::Ellipse { center, semi_axes } => {
                let (a, b) = (semi_axes[0], semi_axes[1]);
                let xi = (xt[0] - center[0]) / a;
                if xi.abs() >= 1.0 {
                    return None;
                }
                let w = (1.0 - xi * xi).sqrt();
                Some(GraphJet {
                    value: center[1] - b * w,
                    grad: vec![b / a * xi / w],
                    hess: DMatrix::from_element(1, 1, b / (a * a) / (w * w * w)),
                })
            }
            DomainKind::Graph { profile, .. } => {
                let r2 = dot(xt, xt);
                let c = profile.curvature + 4.0 * profile.quartic * r2;
                let grad = xt.iter().map(|x| c * x).collect();
                let mut hess = DMatrix::identity(m, m) * c;
                for i in 0..m {
                    for j in 0..m {
                        hess[(i, j)] += 8.0 * profile.quartic * xt[i] * xt[j];
                    }
                }
                Some(GraphJet { value: profile.value(r2.sqrt()), grad, hess })
            }
        }
    }

    /// Deterministic boundary samples (roughly `count` points).
    pub fn sample_boundary(&self, count: usize) -> Vec<Vec<f64>> {
        let count = count.max(8);
        let two_pi = 2.0 * std::f64::consts::PI;
        match &self.kind {
            DomainKind::Interval { lo, hi } => vec![vec![*lo], vec![*hi]],
            DomainKind::Disk { center, radius } if self.dim == 2 => (0..count)
                .map(|i| {
                    let t = two_pi * i as f64 / count as f64 - std::f64::consts::FRAC_PI_2;
                    vec![center[0] + radius * t.cos(), center[1] + radius * t.sin()]
                })
                .collect(),
            DomainKind::Disk { center, radius } => {
                // Fibonacci sphere
                let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
                (0..count)
                    .map(|i| {
                        let z = -1.0 + (2.0 * i as f64 + 1.0) / count as f64;
                        let r = (1.0 - z * z).sqrt();
                        let t = golden * i as f64;
                        vec![center[0] + radius * r * t.cos(), center[1] + radius * r * t.sin(), center[2] + radius * z]
                    })
                    .collect()
            }
            DomainKind::Ellipse { center, semi_axes } => (0..count)
                .map(|i| {
                    let t = two_pi * i as f64 / count as f64 - std::f64::consts::FRAC_PI_2;
                    vec![center[0] + semi_axes[0] * t.cos(), center[1] + semi_axes[1] * t.sin()]
                })
                .collect(),
            DomainKind::Graph { profile, half_width, height } => {
                let l = *half_width;
                let gl = profile.value(l);
                let mut pts = Vec::with_capacity(count + 8);
                if self.dim == 2 {
                    let nb = count / 2;
                    for i in 0..=nb {
                        let x = -l + 2.0 * l * i as f64 / nb as f64;
                        pts.push(vec![x, profile.value(x)]);
                    }
                    let ns = count / 8;
                    for i in 1..ns {
                        let y = gl + (height - gl) * i as f64 / ns as f64;
                        pts.push(vec![-l, y]);
                        pts.push(vec![l, y]);
                    }
                    let nt = count / 4;
                    for i in 0..=nt {
                        pts.push(vec![-l + 2.0 * l * i as f64 / nt as f64, *height]);
                    }
                } else {
                    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
                    let nb = count / 2;
                    for i in 0..nb {
                        let r = l * ((i as f64 + 0.5) / nb as f64).sqrt();
                        let t = golden * i as f64;
                        pts.push(vec![r * t.cos(), r * t.sin(), profile.value(r)]);
                    }
                    let ns = count / 4;
                    let rings = (ns as f64).sqrt().ceil() as usize;
                    for i in 0..ns {
                        let t = two_pi * (i % rings) as f64 / rings as f64;
                        let y = gl + (height - gl) * ((i / rings) as f64 + 0.5) / rings as f64;
                        pts.push(vec![l * t.cos(), l * t.sin(), y]);
                    }
                    let nt = count / 4;
                    for i in 0..nt {
                        let r = l * ((i as f64 + 0.5) / nt as f64).sqrt();
                        let t = golden * i as f64;
                        pts.push(vec![r * t.cos(), r * t.sin(), *height]);
                    }
                }
                pts
            }
        }
    }
}

fn signed_radius(p: &[f64]) -> f64 {
    let n = p.len();
    if n == 2 {
        p[0]
    } else {
        norm(&p[..n - 1])
    }
}

fn sphere_exit(q: &[f64], v: &[f64], radius: f64) -> f64 {
    let a = dot(v, v);
    let b = dot(q, v);
    let c = dot(q, q) - radius * radius;
    let disc = (b * b - a * c).max(0.0);
    // stable root of a s² + 2 b s + c = 0 with c < 0
    if b >= 0.0 {
        -c / (b + disc.sqrt())
    } else {
        (-b + disc.sqrt()) / a
    }
}

/// Distance from an interior point to the complement of the epigraph of the
/// radial profile, within the half-plane spanned by `x'` and `e_n`.
fn graph_epigraph_distance(profile: &GraphProfile, rho: f64, xn: f64) -> f64 {
    let f = |r: f64| (r - rho).powi(2) + (profile.value(r) - xn).powi(2);
    // Projected Newton from the vertical foot point.
    let mut r = rho;
    let mut converged = false;
    for _ in 0..60 {
        let g = profile.value(r) - xn;
        let d1 = 2.0 * (r - rho) + 2.0 * g * profile.slope(r);
        let d2 = 2.0 + 2.0 * profile.slope(r).powi(2) + 2.0 * g * profile.second(r);
        if d2 <= 0.0 {
            break;
        }
        let step = d1 / d2;
        r -= step;
        if step.abs() <= NEWTON_TOL * (1.0 + r.abs()) {
            converged = true;
            break;
        }
    }
    let vertical = (xn - profile.value(rho)).abs();
    if converged && r.is_finite() {
        let d = f(r).sqrt();
        if d <= vertical + 1e-15 {
            return d;
        }
    }
    // Dense sampling fallback, then local refinement.
    let span = vertical.max(1e-300);
    let mut best = (rho, f(rho));
    for i in 0..=FALLBACK_SAMPLES {
        let t = rho - span + 2.0 * span * i as f64 / FALLBACK_SAMPLES as f64;
        let v = f(t);
        if v < best.1 {
            best = (t, v);
        }
    }
    let h = 2.0 * span / FALLBACK_SAMPLES as f64;
    let (mut a, mut b) = (best.0 - h, best.0 + h);
    for _ in 0..100 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if f(m1) < f(m2) {
            b = m2;
        } else {
            a = m1;
        }
    }
    f(0.5 * (a + b)).min(best.1).sqrt()
}

/// Distance from `q` (centred coordinates, inside) to an axis-aligned ellipse:
/// Newton on the angular parametrisation with a dense-sampling fallback.
fn ellipse_distance(q: [f64; 2], axes: [f64; 2]) -> f64 {
    let [a, b] = axes;
    let f = |t: f64| (a * t.cos() - q[0]).powi(2) + (b * t.sin() - q[1]).powi(2);
    let newton = |mut t: f64| -> Option<f64> {
        for _ in 0..60 {
            let (s, c) = t.sin_cos();
            let ex = a * c - q[0];
            let ey = b * s - q[1];
            let d1 = 2.0 * (-ex * a * s + ey * b * c);
            let d2 = 2.0 * (a * a * s * s + b * b * c * c - ex * a * c - ey * b * s);
            if d2 <= 0.0 {
                return None;
            }
            let step = d1 / d2;
            t -= step;
            if step.abs() <= NEWTON_TOL {
                return Some(t);
            }
        }
        None
    };
    let starts = [
        (q[1] * a).atan2(q[0] * b),
        0.0,
        std::f64::consts::FRAC_PI_2,
        std::f64::consts::PI,
        -std::f64::consts::FRAC_PI_2,
    ];
    let mut best = f64::INFINITY;
    for &t0 in &starts {
        if let Some(t) = newton(t0) {
            best = best.min(f(t));
        }
    }
    if !best.is_finite() {
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut arg = 0.0;
        for i in 0..FALLBACK_SAMPLES {
            let t = two_pi * i as f64 / FALLBACK_SAMPLES as f64;
            let v = f(t);
            if v < best {
                best = v;
                arg = t;
            }
        }
        if let Some(t) = newton(arg) {
            best = best.min(f(t));
        }
    }
    best.sqrt()
}
