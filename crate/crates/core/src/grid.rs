//! Geometry of the discrete torus `(1/N) Z^d_N`.
//!
//! Sites are stored row-major over the symmetric window
//! `[-floor(N/2), ceil(N/2))^d`, last axis fastest. Fourier indices share the
//! same window and the same layout, so a spectral array and a site array of
//! one grid have identical shape.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorusGrid {
    side: usize,
    dim: usize,
}

impl TorusGrid {
    pub fn new(side: usize, dim: usize) -> Result<Self> {
        if side < 2 {
            return Err(Error::InvalidGrid(format!("side length must be >= 2, got {side}")));
        }
        if dim == 0 {
            return Err(Error::InvalidGrid("dimension must be >= 1".into()));
        }
        let mut n: usize = 1;
        for _ in 0..dim {
            n = n
                .checked_mul(side)
                .ok_or_else(|| Error::InvalidGrid(format!("{side}^{dim} sites overflow")))?;
        }
        Ok(TorusGrid { side, dim })
    }

    #[inline]
    pub fn side(&self) -> usize {
        self.side
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of sites `N^d`.
    #[inline]
    pub fn len(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Offset between a window coordinate and its array position, `floor(N/2)`.
    #[inline]
    pub fn half(&self) -> usize {
        self.side / 2
    }

    /// Smallest window coordinate.
    #[inline]
    pub fn lo(&self) -> i64 {
        -(self.half() as i64)
    }

    /// One past the largest window coordinate.
    #[inline]
    pub fn hi(&self) -> i64 {
        self.lo() + self.side as i64
    }

    /// Array stride of `axis`.
    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.side.pow((self.dim - 1 - axis) as u32)
    }

    /// Reduce an arbitrary integer into the window.
    #[inline]
    pub fn wrap(&self, c: i64) -> i64 {
        let n = self.side as i64;
        (c - self.lo()).rem_euclid(n) + self.lo()
    }

    #[inline]
    pub fn contains_coord(&self, c: i64) -> bool {
        c >= self.lo() && c < self.hi()
    }

    /// Array index of the (wrapped) integer coordinates `coords`.
    pub fn site(&self, coords: &[i64]) -> usize {
        debug_assert_eq!(coords.len(), self.dim);
        let n = self.side as i64;
        coords.iter().fold(0usize, |acc, &c| {
            let p = (c - self.lo()).rem_euclid(n) as usize;
            acc * self.side + p
        })
    }

    /// Window coordinates of an array index.
    pub fn coords(&self, mut site: usize) -> Vec<i64> {
        let mut out = vec![0i64; self.dim];
        for axis in (0..self.dim).rev() {
            out[axis] = (site % self.side) as i64 + self.lo();
            site /= self.side;
        }
        out
    }

    /// Position (0-based) of `site` along `axis`.
    #[inline]
    pub fn position(&self, site: usize, axis: usize) -> usize {
        (site / self.stride(axis)) % self.side
    }

    /// Neighbor of `site` one step along `axis`, forward or backward, with wrap.
    #[inline]
    pub fn neighbor(&self, site: usize, axis: usize, forward: bool) -> usize {
        let s = self.stride(axis);
        let p = self.position(site, axis);
        if forward {
            if p + 1 == self.side {
                site - p * s
            } else {
                site + s
            }
        } else if p == 0 {
            site + (self.side - 1) * s
        } else {
            site - s
        }
    }

    /// All `2d` neighbors of `site`.
    pub fn neighbors(&self, site: usize) -> Vec<usize> {
        (0..self.dim)
            .flat_map(|axis| [self.neighbor(site, axis, true), self.neighbor(site, axis, false)])
            .collect()
    }

    /// Physical position `x = c / N` of a site.
    pub fn point(&self, site: usize) -> Vec<f64> {
        self.coords(site)
            .into_iter()
            .map(|c| c as f64 / self.side as f64)
            .collect()
    }

    /// Iterator over every Fourier index of the grid, in array order.
    pub fn fourier_indices(&self) -> impl Iterator<Item = FourierIndex> + '_ {
        (0..self.len()).map(move |s| FourierIndex(self.coords(s)))
    }
}

/// Integer frequency vector `k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FourierIndex(pub Vec<i64>);

impl FourierIndex {
    pub fn new(k: impl Into<Vec<i64>>) -> Self {
        FourierIndex(k.into())
    }

    pub fn zero(dim: usize) -> Self {
        FourierIndex(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn norm_sq(&self) -> i64 {
        self.0.iter().map(|c| c * c).sum()
    }

    pub fn neg(&self) -> Self {
        FourierIndex(self.0.iter().map(|c| -c).collect())
    }

    pub fn in_window(&self, grid: &TorusGrid) -> bool {
        self.dim() == grid.dim() && self.0.iter().all(|&c| grid.contains_coord(c))
    }

    /// Fails unless the index lies in the window of `grid`.
    pub fn check(&self, grid: &TorusGrid) -> Result<()> {
        if self.in_window(grid) {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                k: self.0.clone(),
                n: grid.side(),
            })
        }
    }

    /// Array position of this index in a spectral array of `grid`.
    pub fn position(&self, grid: &TorusGrid) -> usize {
        grid.site(&self.0)
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.0
    }
}

impl From<Vec<i64>> for FourierIndex {
    fn from(v: Vec<i64>) -> Self {
        FourierIndex(v)
    }
}

impl<const D: usize> From<[i64; D]> for FourierIndex {
    fn from(v: [i64; D]) -> Self {
        FourierIndex(v.to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_grids() {
        assert!(TorusGrid::new(1, 2).is_err());
        assert!(TorusGrid::new(4, 0).is_err());
        assert!(TorusGrid::new(usize::MAX, 3).is_err());
    }

    #[test]
    fn window_and_ordering() {
        let g = TorusGrid::new(4, 2).unwrap();
        assert_eq!(g.len(), 16);
        assert_eq!(g.coords(0), vec![-2, -2]);
        assert_eq!(g.coords(1), vec![-2, -1]);
        assert_eq!(g.coords(15), vec![1, 1]);
        let odd = TorusGrid::new(5, 1).unwrap();
        assert_eq!(odd.coords(0), vec![-2]);
        assert_eq!(odd.coords(4), vec![2]);
        for s in 0..g.len() {
            assert_eq!(g.site(&g.coords(s)), s);
        }
        assert_eq!(g.site(&[2, 0]), g.site(&[-2, 0]));
    }

    #[test]
    fn every_site_has_2d_distinct_neighbors() {
        let g = TorusGrid::new(3, 3).unwrap();
        for s in 0..g.len() {
            let mut nb = g.neighbors(s);
            assert_eq!(nb.len(), 6);
            nb.sort();
            nb.dedup();
            assert_eq!(nb.len(), 6);
            for axis in 0..3 {
                let f = g.neighbor(s, axis, true);
                assert_eq!(g.neighbor(f, axis, false), s);
            }
        }
    }

    #[test]
    fn fourier_index_checks() {
        let g = TorusGrid::new(8, 2).unwrap();
        assert!(FourierIndex::from([-4, 3]).check(&g).is_ok());
        assert!(FourierIndex::from([4, 0]).check(&g).is_err());
        assert!(FourierIndex::from([1, 0, 0]).check(&g).is_err());
    }
}
