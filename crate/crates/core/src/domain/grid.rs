//! Node-centred lattice grids clipped to a domain.

use super::DomainSpec;
use crate::par::{map_range, Exec};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct GridOptions {
    /// Lattice offset per axis, as a fraction of the spacing.
    pub offset: Vec<f64>,
    /// Nodes closer than `min_gap·spacing` to the boundary are dropped.
    pub min_gap: f64,
    pub exec: Exec,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self { offset: Vec::new(), min_gap: 0.05, exec: Exec::default() }
    }
}

/// Interior lattice nodes together with the boundary crossings of the
/// coordinate grid lines through boundary-adjacent nodes.
#[derive(Clone, Debug)]
pub struct Grid {
    pub dim: usize,
    pub spacing: f64,
    /// Lattice origin; node `k` sits at `origin + k·spacing`.
    pub origin: Vec<f64>,
    points: Vec<f64>,
    lattice: Vec<[i64; 3]>,
    dist: Vec<f64>,
    kmin: [i64; 3],
    counts: [usize; 3],
    /// Dense lattice-box lookup, `u32::MAX` for non-members.
    index: Vec<u32>,
    /// Boundary intersection points of axis grid lines.
    pub boundary_points: Vec<Vec<f64>>,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.lattice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lattice.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn lattice(&self, i: usize) -> [i64; 3] {
        self.lattice[i]
    }

    /// Distance to the boundary of node `i`.
    pub fn dist(&self, i: usize) -> f64 {
        self.dist[i]
    }

    pub fn node_at(&self, k: &[i64; 3]) -> Option<usize> {
        let mut flat = 0usize;
        let mut stride = 1usize;
        for a in 0..3 {
            let r = k[a] - self.kmin[a];
            if r < 0 || r as usize >= self.counts[a] {
                return None;
            }
            flat += r as usize * stride;
            stride *= self.counts[a];
        }
        match self.index[flat] {
            u32::MAX => None,
            i => Some(i as usize),
        }
    }

    pub fn lattice_point(&self, k: &[i64; 3]) -> Vec<f64> {
        (0..self.dim).map(|a| self.origin[a] + k[a] as f64 * self.spacing).collect()
    }

    /// Node closest to `p` (by lattice rounding, then nearest member search).
    pub fn nearest_node(&self, p: &[f64]) -> Option<usize> {
        let mut k = [0i64; 3];
        for a in 0..self.dim {
            k[a] = ((p[a] - self.origin[a]) / self.spacing).round() as i64;
        }
        if let Some(i) = self.node_at(&k) {
            return Some(i);
        }
        (0..self.len()).min_by(|&i, &j| {
            let di = sqdist(self.point(i), p);
            let dj = sqdist(self.point(j), p);
            di.partial_cmp(&dj).unwrap()
        })
    }
}

fn sqdist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn make_grid(domain: &DomainSpec, spacing: f64) -> Result<Grid> {
    make_grid_with(domain, spacing, &GridOptions::default())
}

pub fn make_grid_with(domain: &DomainSpec, spacing: f64, opts: &GridOptions) -> Result<Grid> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::InvalidParameter(format!("spacing must be positive, got {spacing}")));
    }
    let diam = domain.diameter();
    if diam / spacing < 8.0 {
        return Err(Error::Resolution(format!(
            "spacing {spacing} leaves fewer than 8 nodes across diameter {diam}"
        )));
    }
    let dim = domain.dim;
    let origin: Vec<f64> = (0..dim)
        .map(|a| opts.offset.get(a).copied().unwrap_or(0.0) * spacing)
        .collect();
    let (lo, hi) = domain.bounding_box();
    let mut kmin = [0i64; 3];
    let mut kmax = [0i64; 3];
    for a in 0..dim {
        kmin[a] = ((lo[a] - origin[a]) / spacing).ceil() as i64;
        kmax[a] = ((hi[a] - origin[a]) / spacing).floor() as i64;
    }
    let mut counts = [1usize; 3];
    for a in 0..dim {
        counts[a] = (kmax[a] - kmin[a] + 1).max(0) as usize;
    }
    let total = counts[0] * counts[1] * counts[2];
    let gap = opts.min_gap * spacing;

    let candidates = map_range(opts.exec, total, |flat| {
        let mut k = [0i64; 3];
        let mut rem = flat;
        for a in 0..3 {
            k[a] = kmin[a] + (rem % counts[a]) as i64;
            rem /= counts[a];
        }
        let p: Vec<f64> = (0..dim).map(|a| origin[a] + k[a] as f64 * spacing).collect();
        if !domain.contains(&p) {
            return None;
        }
        let d = domain.distance_to_boundary(&p).ok()?;
        (d > gap && d > 0.0).then_some((flat, k, p, d))
    });

    let mut points = Vec::new();
    let mut lattice = Vec::new();
    let mut dist = Vec::new();
    let mut index = vec![u32::MAX; total];
    for (flat, k, p, d) in candidates.into_iter().flatten() {
        index[flat] = lattice.len() as u32;
        lattice.push(k);
        points.extend_from_slice(&p);
        dist.push(d);
    }
    if lattice.is_empty() {
        return Err(Error::Resolution(format!("no interior nodes at spacing {spacing}")));
    }

    let mut grid = Grid {
        dim,
        spacing,
        origin,
        points,
        lattice,
        dist,
        kmin,
        counts,
        index,
        boundary_points: Vec::new(),
    };
    let mut bps = Vec::new();
    for i in 0..grid.len() {
        for a in 0..dim {
            for sgn in [-1i64, 1] {
                let mut k = grid.lattice[i];
                k[a] += sgn;
                if grid.node_at(&k).is_some() {
                    continue;
                }
                let mut v = vec![0.0; dim];
                v[a] = sgn as f64;
                let s = domain.ray_exit(grid.point(i), &v)?;
                let mut z = grid.point(i).to_vec();
                z[a] += sgn as f64 * s;
                bps.push(z);
            }
        }
    }
    grid.boundary_points = bps;
    Ok(grid)
}
