//! Minimum-volume enclosing ellipsoids (Khachiyan's barycentric ascent).

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::{Error, Result};

/// `{x : (x−c)ᵀQ(x−c) ≤ 1}`
#[derive(Clone, Debug, Serialize)]
pub struct Ellipsoid {
    pub center: Vec<f64>,
    #[serde(serialize_with = "ser_matrix")]
    pub shape: DMatrix<f64>,
}

fn ser_matrix<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(m.nrows()))?;
    for i in 0..m.nrows() {
        let row: Vec<f64> = (0..m.ncols()).map(|j| m[(i, j)]).collect();
        seq.serialize_element(&row)?;
    }
    seq.end()
}

impl Ellipsoid {
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// `(x−c)ᵀQ(x−c)`
    pub fn gauge(&self, x: &[f64]) -> f64 {
        let d = DVector::from_iterator(self.dim(), x.iter().zip(&self.center).map(|(a, b)| a - b));
        (d.transpose() * &self.shape * &d)[(0, 0)]
    }

    /// Semi-axis lengths, ascending.
    pub fn semi_axes(&self) -> Vec<f64> {
        let mut ax: Vec<f64> = self.shape.clone().symmetric_eigenvalues().iter().map(|l| 1.0 / l.sqrt()).collect();
        ax.sort_by(f64::total_cmp);
        ax
    }

    pub fn volume(&self) -> f64 {
        let omega = match self.dim() {
            1 => 2.0,
            2 => std::f64::consts::PI,
            3 => 4.0 / 3.0 * std::f64::consts::PI,
            n => std::f64::consts::PI.powf(n as f64 / 2.0) / gamma_half(n + 2),
        };
        omega / self.shape.determinant().sqrt()
    }

    /// Support function `max_{x∈E} d·x`.
    pub fn support(&self, d: &[f64]) -> f64 {
        let v = DVector::from_column_slice(d);
        let inv = self.shape.clone().try_inverse().unwrap_or_else(|| DMatrix::zeros(self.dim(), self.dim()));
        crate::linalg::dot(&self.center, d) + (v.transpose() * inv * &v)[(0, 0)].max(0.0).sqrt()
    }

    /// Dilation by `s` about the center.
    pub fn scaled(&self, s: f64) -> Ellipsoid {
        Ellipsoid { center: self.center.clone(), shape: &self.shape / (s * s) }
    }
}

/// `Γ(k/2)`
fn gamma_half(k: usize) -> f64 {
    if k == 1 {
        std::f64::consts::PI.sqrt()
    } else if k == 2 {
        1.0
    } else {
        (k as f64 / 2.0 - 1.0) * gamma_half(k - 2)
    }
}

/// Affine rank of a point set.
pub fn affine_rank(points: &[Vec<f64>]) -> usize {
    let (Some(first), n) = (points.first(), points.first().map_or(0, |p| p.len())) else { return 0 };
    let m = DMatrix::from_fn(n, points.len(), |i, j| points[j][i] - first[i]);
    let sv = m.svd(false, false).singular_values;
    let top = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|s| **s > 1e-10 * top.max(1e-300)).count()
}

/// 2D convex hull (monotone chain), counter-clockwise without collinear points.
pub fn convex_hull_2d(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut p: Vec<&Vec<f64>> = points.iter().collect();
    p.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    p.dedup_by(|a, b| a[0] == b[0] && a[1] == b[1]);
    if p.len() < 3 {
        return p.into_iter().cloned().collect();
    }
    let cross = |o: &[f64], a: &[f64], b: &[f64]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<&Vec<f64>> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &&Vec<f64>>> = if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
        for q in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    hull.into_iter().cloned().collect()
}

/// Point-in-convex-polygon test (counter-clockwise hull), inclusive.
pub fn in_hull_2d(hull: &[Vec<f64>], x: &[f64], tol: f64) -> bool {
    let n = hull.len();
    (0..n).all(|i| {
        let (a, b) = (&hull[i], &hull[(i + 1) % n]);
        let e = [b[0] - a[0], b[1] - a[1]];
        let len = (e[0] * e[0] + e[1] * e[1]).sqrt();
        (e[0] * (x[1] - a[1]) - e[1] * (x[0] - a[0])) / len >= -tol
    })
}

pub const MVEE_TOL: f64 = 1e-7;
pub const MVEE_MAX_ITER: usize = 100_000;

/// Minimum-volume enclosing ellipsoid of a point set spanning the space.
/// Every point satisfies `gauge ≤ 1 + 10⁻⁶`.
pub fn john_ellipsoid(points: &[Vec<f64>]) -> Result<Ellipsoid> {
    let n = points.first().map_or(0, |p| p.len());
    if n == 0 {
        return Err(Error::Rank { rank: 0, dim: 0 });
    }
    let rank = affine_rank(points);
    if rank < n {
        return Err(Error::Rank { rank, dim: n });
    }
    let pts: Vec<Vec<f64>> = if n == 2 { convex_hull_2d(points) } else { points.to_vec() };
    let m = pts.len();
    let d = n as f64;
    let q = DMatrix::from_fn(n + 1, m, |i, j| if i < n { pts[j][i] } else { 1.0 });
    let mut u = vec![1.0 / m as f64; m];
    for _ in 0..MVEE_MAX_ITER {
        let mut x = DMatrix::zeros(n + 1, n + 1);
        for j in 0..m {
            let c = q.column(j);
            x += u[j] * c * c.transpose();
        }
        let Some(xi) = x.try_inverse() else { return Err(Error::Rank { rank: n - 1, dim: n }) };
        let (mut jmax, mut mmax) = (0, f64::NEG_INFINITY);
        for j in 0..m {
            let c = q.column(j);
            let v = (c.transpose() * &xi * c)[(0, 0)];
            if v > mmax {
                mmax = v;
                jmax = j;
            }
        }
        if (mmax - (d + 1.0)) / (d + 1.0) <= MVEE_TOL {
            break;
        }
        let step = (mmax - d - 1.0) / ((d + 1.0) * (mmax - 1.0));
        for w in u.iter_mut() {
            *w *= 1.0 - step;
        }
        u[jmax] += step;
    }
    let mut c = vec![0.0; n];
    for (j, p) in pts.iter().enumerate() {
        for i in 0..n {
            c[i] += u[j] * p[i];
        }
    }
    let mut cov = DMatrix::zeros(n, n);
    for (j, p) in pts.iter().enumerate() {
        let v = DVector::from_iterator(n, p.iter().zip(&c).map(|(a, b)| a - b));
        cov += u[j] * &v * v.transpose();
    }
    let Some(inv) = cov.try_inverse() else { return Err(Error::Rank { rank: n - 1, dim: n }) };
    let mut e = Ellipsoid { center: c, shape: inv / d };
    let worst = points.iter().map(|p| e.gauge(p)).fold(0.0, f64::max);
    if worst > 1.0 {
        e.shape /= worst;
    }
    Ok(e)
}

/// Unit directions for support-function containment tests.
pub fn directions(dim: usize, count: usize) -> Vec<Vec<f64>> {
    if dim == 2 {
        (0..count)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect()
    } else {
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        (0..count)
            .map(|i| {
                let z = -1.0 + (2.0 * i as f64 + 1.0) / count as f64;
                let r = (1.0 - z * z).sqrt();
                let t = golden * i as f64;
                vec![r * t.cos(), r * t.sin(), z]
            })
            .collect()
    }
}

/// Checks `E/n ⊂ conv(points)` through support functions; returns the
/// worst ratio `h_{E/n}(d)/h_conv(d)` about the ellipsoid center (≤ 1 passes).
pub fn john_shrink_ratio(e: &Ellipsoid, points: &[Vec<f64>]) -> f64 {
    let n = e.dim();
    let shrunk = e.scaled(1.0 / n as f64);
    let count = if n == 2 { 720 } else { 4096 };
    let c = &e.center;
    directions(n, count)
        .iter()
        .map(|d| {
            let hp = points.iter().map(|p| crate::linalg::dot(d, p)).fold(f64::NEG_INFINITY, f64::max)
                - crate::linalg::dot(d, c);
            let he = shrunk.support(d) - crate::linalg::dot(d, c);
            he / hp
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::halton;

    #[test]
    fn cross_gives_unit_disk() {
        let p = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
        let e = john_ellipsoid(&p).unwrap();
        assert!((&e.shape - DMatrix::identity(2, 2)).amax() < 1e-6);
        assert!(e.center.iter().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn square_gives_circumscribed_disk() {
        let p = vec![vec![1.0, 1.0], vec![-1.0, 1.0], vec![1.0, -1.0], vec![-1.0, -1.0]];
        let e = john_ellipsoid(&p).unwrap();
        for a in e.semi_axes() {
            assert!((a - 2f64.sqrt()).abs() < 1e-6);
        }
        assert!((e.volume() - 2.0 * std::f64::consts::PI).abs() < 1e-5);
    }

    #[test]
    fn random_sets_satisfy_john() {
        for dim in [2, 3] {
            let p: Vec<Vec<f64>> =
                (0..200).map(|i| halton(i, dim).iter().enumerate().map(|(k, x)| (k + 1) as f64 * x).collect()).collect();
            let e = john_ellipsoid(&p).unwrap();
            assert!(p.iter().all(|x| e.gauge(x) <= 1.0 + 1e-6));
            assert!(john_shrink_ratio(&e, &p) <= 1.0);
        }
    }

    #[test]
    fn flat_sets_report_rank() {
        let p: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        assert!(matches!(john_ellipsoid(&p), Err(Error::Rank { rank: 1, dim: 2 })));
    }

    #[test]
    fn hull_of_square_with_interior() {
        let mut p = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]];
        p.push(vec![0.5, 0.5]);
        p.push(vec![0.5, 0.0]);
        let h = convex_hull_2d(&p);
        assert_eq!(h.len(), 4);
        assert!(in_hull_2d(&h, &[0.5, 0.5], 0.0));
        assert!(!in_hull_2d(&h, &[1.5, 0.5], 0.0));
    }
}
