//! Site-indexed and frequency-indexed fields on a torus grid.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{FourierIndex, TorusGrid};

/// Scalar type a [`LatticeField`] can carry: `f64` or `Complex64`.
pub trait Scalar:
    Copy
    + Default
    + Send
    + Sync
    + PartialEq
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + 'static
{
    fn from_f64(v: f64) -> Self;
    fn scale(self, s: f64) -> Self;
    fn conj(self) -> Self;
    fn norm_sqr(self) -> f64;
    fn to_complex(self) -> Complex64;
    fn abs(self) -> f64 {
        self.norm_sqr().sqrt()
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn scale(self, s: f64) -> Self {
        self * s
    }
    #[inline]
    fn conj(self) -> Self {
        self
    }
    #[inline]
    fn norm_sqr(self) -> f64 {
        self * self
    }
    #[inline]
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
}

impl Scalar for Complex64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        Complex64::new(v, 0.0)
    }
    #[inline]
    fn scale(self, s: f64) -> Self {
        self * s
    }
    #[inline]
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    #[inline]
    fn norm_sqr(self) -> f64 {
        Complex64::norm_sqr(&self)
    }
    #[inline]
    fn to_complex(self) -> Complex64 {
        self
    }
}

/// A scalar function on the sites of a torus grid.
///
/// Inner products and norms use the normalized pairing
/// `(f, g) = N^{-d} sum_x f(x) conj(g(x))`, under which the Fourier modes are
/// orthonormal.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeField<T = f64> {
    grid: TorusGrid,
    values: Vec<T>,
}

pub type ComplexLatticeField = LatticeField<Complex64>;

impl<T: Scalar> LatticeField<T> {
    pub fn new(grid: TorusGrid, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a grid of {} sites",
                values.len(),
                grid.len()
            )));
        }
        Ok(LatticeField { grid, values })
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        LatticeField {
            grid,
            values: vec![T::default(); grid.len()],
        }
    }

    pub fn constant(grid: TorusGrid, v: T) -> Self {
        LatticeField {
            grid,
            values: vec![v; grid.len()],
        }
    }

    pub fn from_fn(grid: TorusGrid, f: impl FnMut(usize) -> T) -> Self {
        LatticeField {
            grid,
            values: (0..grid.len()).map(f).collect(),
        }
    }

    #[inline]
    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, site: usize) -> T {
        self.values[site]
    }

    pub fn ensure_same_grid<U: Scalar>(&self, other: &LatticeField<U>) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::ShapeMismatch(format!(
                "fields live on different grids ({:?} vs {:?})",
                self.grid, other.grid
            )));
        }
        Ok(())
    }

    /// Spatial average `N^{-d} sum_x f(x)`.
    pub fn mean(&self) -> T {
        let mut s = T::default();
        for &v in &self.values {
            s += v;
        }
        s.scale(1.0 / self.values.len() as f64)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Normalized inner product `(self, other)`.
    pub fn inner(&self, other: &Self) -> Result<T> {
        self.ensure_same_grid(other)?;
        let mut s = T::default();
        for (&a, &b) in self.values.iter().zip(&other.values) {
            s += a * b.conj();
        }
        Ok(s.scale(1.0 / self.values.len() as f64))
    }

    /// Squared normalized norm `N^{-d} sum_x |f(x)|^2`.
    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.values.len() as f64
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// True if the spatial mean vanishes to `rel_tol` times the largest magnitude.
    pub fn is_mean_zero(&self, rel_tol: f64) -> bool {
        self.mean().abs() <= rel_tol * self.max_abs().max(f64::MIN_POSITIVE)
    }

    /// Fails with [`Error::NotMeanZero`] unless the mean vanishes to `rel_tol`.
    pub fn check_mean_zero(&self, rel_tol: f64) -> Result<()> {
        if self.max_abs() == 0.0 || self.is_mean_zero(rel_tol) {
            Ok(())
        } else {
            Err(Error::NotMeanZero {
                mean: self.mean().abs(),
                scale: self.max_abs(),
            })
        }
    }

    /// Subtract the spatial mean in place.
    pub fn center(&mut self) {
        let m = self.mean();
        for v in &mut self.values {
            *v = *v - m;
        }
    }

    pub fn centered(mut self) -> Self {
        self.center();
        self
    }

    pub fn scaled(&self, s: f64) -> Self {
        LatticeField {
            grid: self.grid,
            values: self.values.iter().map(|v| v.scale(s)).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.ensure_same_grid(other)?;
        Ok(LatticeField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| a - b)
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.ensure_same_grid(other)?;
        Ok(LatticeField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| a + b)
                .collect(),
        })
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: T, other: &Self) -> Result<()> {
        self.ensure_same_grid(other)?;
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn to_complex(&self) -> ComplexLatticeField {
        LatticeField {
            grid: self.grid,
            values: self.values.iter().map(|v| v.to_complex()).collect(),
        }
    }
}

impl LatticeField<Complex64> {
    pub fn from_parts(re: &LatticeField<f64>, im: &LatticeField<f64>) -> Result<Self> {
        re.ensure_same_grid(im)?;
        Ok(LatticeField {
            grid: re.grid,
            values: re
                .values
                .iter()
                .zip(&im.values)
                .map(|(&a, &b)| Complex64::new(a, b))
                .collect(),
        })
    }

    pub fn re(&self) -> LatticeField<f64> {
        LatticeField {
            grid: self.grid,
            values: self.values.iter().map(|v| v.re).collect(),
        }
    }

    pub fn im(&self) -> LatticeField<f64> {
        LatticeField {
            grid: self.grid,
            values: self.values.iter().map(|v| v.im).collect(),
        }
    }
}

/// Fourier coefficients `<f, phi_k>` for every `k` in the window of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: TorusGrid,
    coefficients: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: TorusGrid, coefficients: Vec<Complex64>) -> Result<Self> {
        if coefficients.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} coefficients for a grid of {} sites",
                coefficients.len(),
                grid.len()
            )));
        }
        Ok(SpectralField { grid, coefficients })
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        SpectralField {
            grid,
            coefficients: vec![Complex64::default(); grid.len()],
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn coefficients_mut(&mut self) -> &mut [Complex64] {
        &mut self.coefficients
    }

    pub fn into_coefficients(self) -> Vec<Complex64> {
        self.coefficients
    }

    pub fn coefficient(&self, k: &FourierIndex) -> Result<Complex64> {
        k.check(&self.grid)?;
        Ok(self.coefficients[k.position(&self.grid)])
    }

    pub fn set(&mut self, k: &FourierIndex, v: Complex64) -> Result<()> {
        k.check(&self.grid)?;
        let p = k.position(&self.grid);
        self.coefficients[p] = v;
        Ok(())
    }

    /// `(k, coefficient)` pairs in array order.
    pub fn iter(&self) -> impl Iterator<Item = (FourierIndex, Complex64)> + '_ {
        self.grid.fourier_indices().zip(self.coefficients.iter().copied())
    }

    /// `sum_k |c_k|^2`, equal to the squared normalized norm of the origin field.
    pub fn energy(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        SpectralField {
            grid: self.grid,
            coefficients: self.coefficients.iter().map(|c| c * s).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::ShapeMismatch("spectral fields on different grids".into()));
        }
        Ok(SpectralField {
            grid: self.grid,
            coefficients: self
                .coefficients
                .iter()
                .zip(&other.coefficients)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    /// Largest violation of `c(-k) = conj(c(k))`.
    pub fn hermitian_defect(&self) -> f64 {
        let g = self.grid;
        (0..g.len())
            .map(|p| {
                let k = g.coords(p);
                let mk: Vec<i64> = k.iter().map(|c| -c).collect();
                (self.coefficients[g.site(&mk)] - self.coefficients[p].conj()).norm()
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalized_inner_product() {
        let g = TorusGrid::new(4, 1).unwrap();
        let f = LatticeField::new(g, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let one = LatticeField::constant(g, 1.0);
        assert_eq!(f.inner(&one).unwrap(), 2.5);
        assert_eq!(f.norm_sq(), 30.0 / 4.0);
        assert!(!f.is_mean_zero(1e-12));
        let c = f.clone().centered();
        assert!(c.is_mean_zero(1e-12));
        assert!(c.check_mean_zero(1e-12).is_ok());
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let g = TorusGrid::new(4, 1).unwrap();
        assert!(LatticeField::new(g, vec![0.0; 3]).is_err());
        let h = TorusGrid::new(2, 2).unwrap();
        let a = LatticeField::<f64>::zeros(g);
        let b = LatticeField::<f64>::zeros(h);
        assert!(a.inner(&b).is_err());
    }

    #[test]
    fn complex_parts_round_trip() {
        let g = TorusGrid::new(3, 1).unwrap();
        let re = LatticeField::new(g, vec![1.0, 2.0, 3.0]).unwrap();
        let im = LatticeField::new(g, vec![-1.0, 0.5, 0.0]).unwrap();
        let z = LatticeField::from_parts(&re, &im).unwrap();
        assert_eq!(z.re(), re);
        assert_eq!(z.im(), im);
    }
}
