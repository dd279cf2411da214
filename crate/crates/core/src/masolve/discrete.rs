//! Grid functions, Shortley–Weller second differences, the monotone
//! Monge-Ampère operator and its frozen-frame linearisation.

use std::fmt::Write as _;
use std::sync::Arc;

use super::Stencil;
use crate::domain::{make_grid_with, DomainSpec, Grid, GridOptions};
use crate::par::{map_range, Exec};
use crate::{Error, Result};

/// Neighbour of a node along a signed stencil direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Nbr {
    Node(usize),
    /// Index into the boundary crossing points of the discretisation.
    Boundary(usize),
}

/// Grid plus, for every node and stencil direction, the two neighbours
/// (interior nodes or exact boundary crossings) and their arm fractions.
#[derive(Debug)]
pub struct Discretization {
    pub domain: DomainSpec,
    pub grid: Grid,
    pub stencil: Stencil,
    /// `[node][dir][side]`, side 0 = `+v`, 1 = `−v`; negative entries are
    /// `-(b+1)` for boundary crossing `b`.
    nb: Vec<i32>,
    bpoints: Vec<f64>,
    /// Arm length of each crossing as a fraction of `|v|·spacing`.
    barm: Vec<f64>,
    dir_len: Vec<f64>,
}

impl Discretization {
    pub fn new(domain: &DomainSpec, spacing: f64, stencil: Stencil, opts: &GridOptions) -> Result<Arc<Self>> {
        if stencil.dim != domain.dim {
            return Err(Error::Stencil(format!(
                "stencil dimension {} does not match domain dimension {}",
                stencil.dim, domain.dim
            )));
        }
        let grid = make_grid_with(domain, spacing, opts)?;
        let nd = stencil.dirs.len();
        let dim = grid.dim;
        let per_node = map_range(opts.exec, grid.len(), |i| {
            let k = grid.lattice(i);
            let x = grid.point(i);
            let mut out: Vec<std::result::Result<usize, (Vec<f64>, f64)>> = Vec::with_capacity(2 * nd);
            for v in &stencil.dirs {
                for sgn in [1i64, -1] {
                    let kk = [k[0] + sgn * v[0], k[1] + sgn * v[1], k[2] + sgn * v[2]];
                    if let Some(j) = grid.node_at(&kk) {
                        out.push(Ok(j));
                        continue;
                    }
                    let step: Vec<f64> = (0..dim).map(|a| sgn as f64 * v[a] as f64 * spacing).collect();
                    let s = match domain.ray_exit(x, &step) {
                        Ok(s) => s,
                        Err(e) => return Err(e),
                    };
                    let z: Vec<f64> = (0..dim).map(|a| x[a] + s * step[a]).collect();
                    out.push(Err((z, s)));
                }
            }
            Ok(out)
        });
        let mut nb = Vec::with_capacity(grid.len() * 2 * nd);
        let mut bpoints = Vec::new();
        let mut barm = Vec::new();
        for row in per_node {
            for e in row? {
                match e {
                    Ok(j) => nb.push(j as i32),
                    Err((z, s)) => {
                        if !(s > 0.0) {
                            return Err(Error::Stencil(format!("degenerate boundary arm {s} at {z:?}")));
                        }
                        nb.push(-(barm.len() as i32) - 1);
                        bpoints.extend_from_slice(&z);
                        barm.push(s);
                    }
                }
            }
        }
        let dir_len = (0..nd).map(|d| stencil.length(d) * spacing).collect();
        Ok(Arc::new(Discretization { domain: domain.clone(), grid, stencil, nb, bpoints, barm, dir_len }))
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.grid.dim
    }

    pub fn spacing(&self) -> f64 {
        self.grid.spacing
    }

    pub fn n_boundary(&self) -> usize {
        self.barm.len()
    }

    pub fn boundary_point(&self, b: usize) -> &[f64] {
        let d = self.grid.dim;
        &self.bpoints[b * d..(b + 1) * d]
    }

    /// Neighbour of node `i` along `side ∈ {0: +v, 1: −v}` of direction `d`.
    #[inline]
    pub fn neighbor(&self, i: usize, d: usize, side: usize) -> Nbr {
        let e = self.nb[(i * self.stencil.dirs.len() + d) * 2 + side];
        if e >= 0 {
            Nbr::Node(e as usize)
        } else {
            Nbr::Boundary((-e - 1) as usize)
        }
    }

    #[inline]
    fn arm(&self, n: Nbr) -> f64 {
        match n {
            Nbr::Node(_) => 1.0,
            Nbr::Boundary(b) => self.barm[b],
        }
    }

    /// Coefficients `(c₊, c₋)` of the second difference along direction `d`:
    /// `D = c₊(u₊ − u) + c₋(u₋ − u)`.
    #[inline]
    pub fn sd_coeffs(&self, i: usize, d: usize) -> (Nbr, f64, Nbr, f64) {
        let np = self.neighbor(i, d, 0);
        let nm = self.neighbor(i, d, 1);
        let (sp, sm) = (self.arm(np), self.arm(nm));
        let h = self.dir_len[d];
        let c = 2.0 / ((sp + sm) * h * h);
        (np, c / sp, nm, c / sm)
    }

    /// True if some stencil neighbour of node `i` is a boundary crossing.
    pub fn boundary_adjacent(&self, i: usize) -> bool {
        let nd = self.stencil.dirs.len();
        self.nb[i * 2 * nd..(i + 1) * 2 * nd].iter().any(|&e| e < 0)
    }

    /// True if an axis neighbour of node `i` is a boundary crossing.
    pub fn axis_boundary_adjacent(&self, i: usize) -> bool {
        (0..self.dim()).any(|a| {
            matches!(self.neighbor(i, a, 0), Nbr::Boundary(_)) || matches!(self.neighbor(i, a, 1), Nbr::Boundary(_))
        })
    }
}

/// Values at interior nodes plus the trace at boundary crossings.
#[derive(Clone, Debug)]
pub struct GridFunction {
    pub disc: Arc<Discretization>,
    pub values: Vec<f64>,
    pub trace: Vec<f64>,
}

impl GridFunction {
    pub fn from_fn<F: Fn(&[f64]) -> f64>(disc: &Arc<Discretization>, f: F) -> Self {
        let values = (0..disc.len()).map(|i| f(disc.grid.point(i))).collect();
        let trace = (0..disc.n_boundary()).map(|b| f(disc.boundary_point(b))).collect();
        GridFunction { disc: disc.clone(), values, trace }
    }

    /// Node values from `f`, trace from `g`.
    pub fn from_fns<F, G>(disc: &Arc<Discretization>, f: F, g: G) -> Self
    where
        F: Fn(&[f64]) -> f64,
        G: Fn(&[f64]) -> f64,
    {
        let mut u = Self::from_fn(disc, f);
        u.trace = (0..disc.n_boundary()).map(|b| g(disc.boundary_point(b))).collect();
        u
    }

    pub fn spacing(&self) -> f64 {
        self.disc.spacing()
    }

    pub fn grid(&self) -> &Grid {
        &self.disc.grid
    }

    #[inline]
    pub fn at(&self, n: Nbr) -> f64 {
        match n {
            Nbr::Node(j) => self.values[j],
            Nbr::Boundary(b) => self.trace[b],
        }
    }

    /// Magnitude used to scale roundoff-level tolerances.
    pub fn scale(&self) -> f64 {
        let m = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        m(&self.values).max(m(&self.trace)).max(1e-300)
    }

    #[inline]
    pub fn second_difference(&self, i: usize, d: usize) -> f64 {
        let (np, cp, nm, cm) = self.disc.sd_coeffs(i, d);
        let u = self.values[i];
        cp * (self.at(np) - u) + cm * (self.at(nm) - u)
    }

    /// Smallest second difference over all stencil directions and nodes.
    pub fn min_second_difference(&self) -> f64 {
        let nd = self.disc.stencil.dirs.len();
        (0..self.values.len())
            .flat_map(|i| (0..nd).map(move |d| (i, d)))
            .map(|(i, d)| self.second_difference(i, d))
            .fold(f64::INFINITY, f64::min)
    }

    /// Multilinear interpolation on the lattice cell containing `p`; `None`
    /// if a cell corner is not an interior node.
    pub fn interpolate(&self, p: &[f64]) -> Option<f64> {
        let g = self.grid();
        let dim = g.dim;
        let mut base = [0i64; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..dim {
            let t = (p[a] - g.origin[a]) / g.spacing;
            base[a] = t.floor() as i64;
            frac[a] = t - base[a] as f64;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << dim) {
            let mut k = base;
            let mut w = 1.0;
            for a in 0..dim {
                if corner >> a & 1 == 1 {
                    k[a] += 1;
                    w *= frac[a];
                } else {
                    w *= 1.0 - frac[a];
                }
            }
            if w == 0.0 {
                continue;
            }
            acc += w * self.values[g.node_at(&k)?];
        }
        Some(acc)
    }

    /// CSV with one row per interior node: `x1,..,xn,u`.
    pub fn to_csv(&self) -> String {
        let dim = self.disc.dim();
        let mut s = String::new();
        let head: Vec<String> = (1..=dim).map(|a| format!("x{a}")).collect();
        s.push_str(&head.join(","));
        s.push_str(",u\n");
        for i in 0..self.values.len() {
            for &x in self.disc.grid.point(i) {
                let _ = write!(s, "{x:.16e},");
            }
            let _ = writeln!(s, "{:.16e}", self.values[i]);
        }
        s
    }
}

/// Value and argmin frame of the monotone operator at node `i`.
#[inline]
pub(crate) fn ma_node(u: &GridFunction, i: usize) -> (f64, usize) {
    let st = &u.disc.stencil;
    let mut best = f64::INFINITY;
    let mut arg = 0;
    for (fi, frame) in st.frames.iter().enumerate() {
        let mut p = 1.0;
        for &d in frame {
            p *= u.second_difference(i, d).max(0.0);
        }
        if p < best {
            best = p;
            arg = fi;
        }
    }
    (best, arg)
}

/// Monotone approximation of `det D²u` at node `node`: the minimum over
/// orthogonal stencil frames of the product of positive parts of second
/// differences.
pub fn ma_monotone(u: &GridFunction, node: usize) -> Result<f64> {
    if node >= u.values.len() {
        return Err(Error::Stencil(format!("node {node} is not an interior node")));
    }
    Ok(ma_node(u, node).0)
}

pub fn ma_all(u: &GridFunction, exec: Exec) -> Vec<f64> {
    map_range(exec, u.values.len(), |i| ma_node(u, i).0)
}

/// Frozen-frame derivative of the monotone operator: per node a diagonal
/// entry and nonnegative off-diagonal weights on the neighbours.
#[derive(Clone, Debug)]
pub struct LinearizedMa {
    pub diag: Vec<f64>,
    pub offdiag: Vec<Vec<(Nbr, f64)>>,
    /// Frozen frame index per node.
    pub frames: Vec<usize>,
    /// Regularised operator value `Π max(D_k, ε)` in the frozen frame.
    pub ma_reg: Vec<f64>,
}

impl LinearizedMa {
    /// Applies the operator to `v` (node values and trace).
    pub fn apply(&self, v: &GridFunction) -> Vec<f64> {
        (0..self.diag.len())
            .map(|i| self.diag[i] * v.values[i] + self.offdiag[i].iter().map(|&(n, w)| w * v.at(n)).sum::<f64>())
            .collect()
    }
}

/// `ε_reg` for the Jacobian: `10⁻¹²·scale(u)/spacing²`.
pub fn regularization(u: &GridFunction) -> f64 {
    1e-12 * u.scale() / (u.spacing() * u.spacing())
}

pub fn linearized_ma(u: &GridFunction, exec: Exec) -> LinearizedMa {
    let eps = regularization(u);
    linearize_with(u, eps, exec)
}

pub(crate) fn linearize_with(u: &GridFunction, eps: f64, exec: Exec) -> LinearizedMa {
    let disc = &u.disc;
    let rows = map_range(exec, u.values.len(), |i| {
        let st = &disc.stencil;
        // argmin of the regularised products
        let mut best = f64::INFINITY;
        let mut arg = 0;
        for (fi, frame) in st.frames.iter().enumerate() {
            let p: f64 = frame.iter().map(|&d| u.second_difference(i, d).max(eps)).product();
            if p < best {
                best = p;
                arg = fi;
            }
        }
        let frame = &st.frames[arg];
        let ds: Vec<f64> = frame.iter().map(|&d| u.second_difference(i, d).max(eps)).collect();
        let mut diag = 0.0;
        let mut off = Vec::with_capacity(2 * frame.len());
        for (k, &d) in frame.iter().enumerate() {
            let w: f64 = ds.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, x)| x).product();
            let (np, cp, nm, cm) = disc.sd_coeffs(i, d);
            diag -= w * (cp + cm);
            off.push((np, w * cp));
            off.push((nm, w * cm));
        }
        (diag, off, arg, best)
    });
    let mut lin = LinearizedMa {
        diag: Vec::with_capacity(rows.len()),
        offdiag: Vec::with_capacity(rows.len()),
        frames: Vec::with_capacity(rows.len()),
        ma_reg: Vec::with_capacity(rows.len()),
    };
    for (d, o, f, m) in rows {
        lin.diag.push(d);
        lin.offdiag.push(o);
        lin.frames.push(f);
        lin.ma_reg.push(m);
    }
    lin
}

/// Gradient at node `node` by axis differences; the three-point
/// unequal-arm formula uses the boundary trace next to the boundary.
pub fn gradient(u: &GridFunction, node: usize) -> Result<Vec<f64>> {
    if node >= u.values.len() {
        return Err(Error::Stencil(format!("node {node} is not an interior node")));
    }
    let disc = &u.disc;
    let h = disc.spacing();
    Ok((0..disc.dim())
        .map(|a| {
            let np = disc.neighbor(node, a, 0);
            let nm = disc.neighbor(node, a, 1);
            let (sp, sm) = (disc.arm(np), disc.arm(nm));
            let u0 = u.values[node];
            (sm * sm * (u.at(np) - u0) - sp * sp * (u.at(nm) - u0)) / (sp * sm * (sp + sm) * h)
        })
        .collect())
}

/// Discretization with the default grid options and a width-`width` stencil.
pub fn default_disc(domain: &DomainSpec, spacing: f64, width: usize) -> Result<Arc<Discretization>> {
    Discretization::new(domain, spacing, Stencil::new(domain.dim, width)?, &GridOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::GraphProfile;

    fn disk_disc(h: f64, w: usize) -> Arc<Discretization> {
        let d = DomainSpec::disk(vec![0.0, 0.0], 1.0, 0.5).unwrap();
        default_disc(&d, h, w).unwrap()
    }

    #[test]
    fn quadratic_has_unit_determinant() {
        let disc = disk_disc(1.0 / 32.0, 2);
        let u = GridFunction::from_fn(&disc, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
        for i in 0..disc.len() {
            assert!((ma_monotone(&u, i).unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn diagonal_quadratic() {
        // Hessian diag(1, 4)
        let disc = disk_disc(1.0 / 32.0, 1);
        let u = GridFunction::from_fn(&disc, |x| 0.5 * x[0] * x[0] + 2.0 * x[1] * x[1]);
        for i in 0..disc.len() {
            assert!((ma_monotone(&u, i).unwrap() - 4.0).abs() < 1e-9);
        }
    }

    #[test]
    fn liouville_profile_value() {
        let d = DomainSpec::graph(2, GraphProfile::flat(), 1.0, 1.0, 0.25).unwrap();
        let disc = default_disc(&d, 1.0 / 64.0, 3).unwrap();
        let u = GridFunction::from_fn(&disc, |x| crate::barriers::u0_value(0.5, x));
        let i = disc.grid.node_at(&[0, 16, 0]).unwrap();
        assert!((ma_monotone(&u, i).unwrap() - 2.0).abs() < 0.05);
    }

    #[test]
    fn linearization_structure() {
        let disc = disk_disc(1.0 / 16.0, 2);
        let u = GridFunction::from_fn(&disc, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
        let lin = linearized_ma(&u, Exec::Sequential);
        let quad = lin.apply(&u);
        let affine = lin.apply(&GridFunction::from_fn(&disc, |x| 3.0 * x[0] - x[1] + 0.5));
        let ones = lin.apply(&GridFunction::from_fn(&disc, |_| 1.0));
        for i in 0..disc.len() {
            assert!((quad[i] - 2.0).abs() < 1e-9);
            assert!(affine[i].abs() < 1e-8);
            assert!(ones[i].abs() < 1e-9);
            let s: f64 = lin.offdiag[i].iter().map(|x| x.1).sum();
            assert!(lin.offdiag[i].iter().all(|x| x.1 >= 0.0));
            assert!((s + lin.diag[i]).abs() <= 1e-12 * s);
        }
    }

    #[test]
    fn gradients() {
        let disc = disk_disc(1.0 / 16.0, 1);
        let aff = GridFunction::from_fn(&disc, |x| 2.0 * x[0] - 3.0 * x[1] + 1.0);
        let quad = GridFunction::from_fn(&disc, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
        for i in 0..disc.len() {
            let g = gradient(&aff, i).unwrap();
            assert!((g[0] - 2.0).abs() < 1e-12 && (g[1] + 3.0).abs() < 1e-12);
            let g = gradient(&quad, i).unwrap();
            let p = disc.grid.point(i);
            assert!((g[0] - p[0]).abs() < 1e-12 && (g[1] - p[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn liouville_normal_derivative() {
        let d = DomainSpec::graph(2, GraphProfile::flat(), 1.0, 1.0, 0.25).unwrap();
        let disc = default_disc(&d, 1.0 / 128.0, 1).unwrap();
        let u = GridFunction::from_fn(&disc, |x| crate::barriers::u0_value(0.5, x));
        let i = disc.grid.node_at(&[0, 32, 0]).unwrap();
        let g = gradient(&u, i).unwrap();
        assert!(g[0].abs() < 1e-12);
        assert!((g[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn boundary_arms_hit_the_boundary() {
        let d = DomainSpec::ellipse([0.0, 0.5], [1.0, 0.5], 0.2).unwrap();
        let disc = default_disc(&d, 1.0 / 32.0, 3).unwrap();
        assert!(disc.n_boundary() > 0);
        for b in 0..disc.n_boundary() {
            assert!(d.boundary_residual(disc.boundary_point(b)) < 1e-12);
        }
    }

    #[test]
    fn csv_has_one_row_per_node() {
        let disc = disk_disc(1.0 / 8.0, 1);
        let u = GridFunction::from_fn(&disc, |x| x[0]);
        let csv = u.to_csv();
        assert_eq!(csv.lines().count(), disc.len() + 1);
        assert!(csv.starts_with("x1,x2,u\n"));
    }
}
