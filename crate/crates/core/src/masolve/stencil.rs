//! Lattice direction sets and orthogonal frames for the wide stencil.

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Stencil {
    pub width: usize,
    pub dim: usize,
    /// One representative of each `±v` pair.
    pub dirs: Vec<[i64; 3]>,
    /// Mutually orthogonal `dim`-tuples of indices into `dirs`.
    pub frames: Vec<Vec<usize>>,
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn canonical(v: [i64; 3]) -> bool {
    // first nonzero component positive
    for c in v {
        if c != 0 {
            return c > 0;
        }
    }
    false
}

fn idot(a: &[i64; 3], b: &[i64; 3]) -> i64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

impl Stencil {
    /// All coprime directions with max-norm at most `width`.
    pub fn new(dim: usize, width: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Stencil(format!("dimension {dim} not supported")));
        }
        if width == 0 {
            return Err(Error::Stencil("stencil width must be at least 1".into()));
        }
        let w = width as i64;
        let range = |a: usize| if a < dim { -w..=w } else { 0..=0 };
        let mut dirs = Vec::new();
        for x in range(0) {
            for y in range(1) {
                for z in range(2) {
                    let v = [x, y, z];
                    if canonical(v) && gcd(gcd(x, y), z) == 1 {
                        dirs.push(v);
                    }
                }
            }
        }
        // axes first, then by length
        dirs.sort_by_key(|v| (idot(v, v), std::cmp::Reverse(*v)));
        let mut frames = Vec::new();
        match dim {
            1 => frames.push(vec![0]),
            2 => {
                for i in 0..dirs.len() {
                    for j in i + 1..dirs.len() {
                        if idot(&dirs[i], &dirs[j]) == 0 {
                            frames.push(vec![i, j]);
                        }
                    }
                }
            }
            _ => {
                for i in 0..dirs.len() {
                    for j in i + 1..dirs.len() {
                        if idot(&dirs[i], &dirs[j]) != 0 {
                            continue;
                        }
                        for k in j + 1..dirs.len() {
                            if idot(&dirs[i], &dirs[k]) == 0 && idot(&dirs[j], &dirs[k]) == 0 {
                                frames.push(vec![i, j, k]);
                            }
                        }
                    }
                }
            }
        }
        let s = Stencil { width, dim, dirs, frames };
        s.check()?;
        Ok(s)
    }

    fn check(&self) -> Result<()> {
        for a in 0..self.dim {
            let mut e = [0i64; 3];
            e[a] = 1;
            if !self.dirs.contains(&e) {
                return Err(Error::Stencil(format!("axis e_{} missing", a + 1)));
            }
        }
        if self.frames.is_empty() {
            return Err(Error::Stencil("no orthogonal frame in the direction set".into()));
        }
        Ok(())
    }

    /// Signed direction list `±v`.
    pub fn signed_dirs(&self) -> Vec<[i64; 3]> {
        self.dirs.iter().flat_map(|v| [*v, [-v[0], -v[1], -v[2]]]).collect()
    }

    pub fn length(&self, d: usize) -> f64 {
        (idot(&self.dirs[d], &self.dirs[d]) as f64).sqrt()
    }
}
