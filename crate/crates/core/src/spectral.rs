//! Fourier basis, Laplacian eigenvalues, transforms and Sobolev norms.
//!
//! The transform realizes `c(k) = (f, phi_k) = N^{-d} sum_x f(x) exp(-2 pi i k.x)`
//! for every `k` in the symmetric window at once, and its inverse
//! `f(x) = sum_k c(k) phi_k(x)`.

use std::f64::consts::PI;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::field::{ComplexLatticeField, LatticeField, Scalar, SpectralField};
use crate::grid::{FourierIndex, TorusGrid};

/// Plans and window phases for one transform length.
struct AxisPlan {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// `exp(2 pi i k h / N)` for the window index at array position `q`.
    phases: Vec<Complex64>,
}

fn axis_plan(n: usize) -> Arc<AxisPlan> {
    static CACHE: OnceLock<Mutex<(FftPlanner<f64>, HashMap<usize, Arc<AxisPlan>>)>> = OnceLock::new();
    let mut guard = CACHE
        .get_or_init(|| Mutex::new((FftPlanner::new(), HashMap::new())))
        .lock()
        .unwrap_or_else(|e| e.into_inner());
    let (planner, plans) = &mut *guard;
    if let Some(p) = plans.get(&n) {
        return p.clone();
    }
    let h = (n / 2) as i64;
    let phases = (0..n as i64)
        .map(|q| {
            // reduce k*h mod n before forming the angle
            let r = ((q - h) * h).rem_euclid(n as i64) as f64;
            Complex64::from_polar(1.0, 2.0 * PI * r / n as f64)
        })
        .collect();
    let plan = Arc::new(AxisPlan {
        forward: planner.plan_fft_forward(n),
        inverse: planner.plan_fft_inverse(n),
        phases,
    });
    plans.insert(n, plan.clone());
    plan
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Direction {
    /// Sites to coefficients, normalized by `N^{-d}`.
    Forward,
    /// Coefficients to sites, unnormalized.
    Inverse,
}

/// In-place transform of an array laid out on `grid`.
///
/// Along each axis the window sum `sum_x f(x) exp(-2 pi i k x / N)` with
/// `x, k` in `[-h, N - h)` is a standard FFT of the array followed by a
/// cyclic shift by `h` and the phase `exp(2 pi i k h / N)`; the inverse
/// undoes the phase and shift before the FFT.
pub(crate) fn transform_in_place(grid: &TorusGrid, data: &mut [Complex64], dir: Direction) {
    let n = grid.side();
    let h = grid.half();
    let inverse = dir == Direction::Inverse;
    let plan = axis_plan(n);
    let fft = if inverse { &plan.inverse } else { &plan.forward };
    let phases = &plan.phases;
    let total = grid.len();
    let inv_n = 1.0 / n as f64;
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    // forward output position q reads FFT bin (q - h) mod n; inverse input bin m comes from q = (m + h) mod n
    let src = |q: usize| (q + n - h) % n;

    for axis in 0..grid.dim() {
        let s = grid.stride(axis);
        if s == 1 {
            let mut line = vec![Complex64::default(); n];
            for row in data.chunks_exact_mut(n) {
                if inverse {
                    for q in 0..n {
                        line[src(q)] = row[q] * phases[q].conj();
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    row.copy_from_slice(&line);
                } else {
                    fft.process_with_scratch(row, &mut scratch);
                    line.copy_from_slice(row);
                    for q in 0..n {
                        row[q] = line[src(q)] * (phases[q] * inv_n);
                    }
                }
            }
            continue;
        }
        let block = n * s;
        let mut buf = vec![Complex64::default(); block];
        for base in (0..total).step_by(block) {
            let chunk = &mut data[base..base + block];
            // gather: line t occupies buf[t*n .. (t+1)*n]
            for p in 0..n {
                let row = &chunk[p * s..p * s + s];
                if inverse {
                    let (m, ph) = (src(p), phases[p].conj());
                    for (t, v) in row.iter().enumerate() {
                        buf[t * n + m] = v * ph;
                    }
                } else {
                    for (t, v) in row.iter().enumerate() {
                        buf[t * n + p] = *v;
                    }
                }
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            for q in 0..n {
                let dst = &mut chunk[q * s..q * s + s];
                if inverse {
                    for (t, v) in dst.iter_mut().enumerate() {
                        *v = buf[t * n + q];
                    }
                } else {
                    let (m, ph) = (src(q), phases[q] * inv_n);
                    for (t, v) in dst.iter_mut().enumerate() {
                        *v = buf[t * n + m] * ph;
                    }
                }
            }
        }
    }
}

/// Fourier coefficients of a field.
pub fn dft<T: Scalar>(field: &LatticeField<T>) -> SpectralField {
    let grid = *field.grid();
    let mut data: Vec<Complex64> = field.values().iter().map(|v| v.to_complex()).collect();
    transform_in_place(&grid, &mut data, Direction::Forward);
    SpectralField::new(grid, data).expect("transform preserves length")
}

/// Synthesis `f = sum_k c(k) phi_k`.
pub fn idft(spec: &SpectralField) -> ComplexLatticeField {
    let grid = *spec.grid();
    let mut data = spec.coefficients().to_vec();
    transform_in_place(&grid, &mut data, Direction::Inverse);
    LatticeField::new(grid, data).expect("transform preserves length")
}

/// Real part of [`idft`], for Hermitian-symmetric coefficients.
pub fn idft_real(spec: &SpectralField) -> LatticeField<f64> {
    idft(spec).re()
}

/// The grid restriction of `phi_k(x) = exp(2 pi i k.x)`.
pub fn fourier_mode(grid: &TorusGrid, k: &FourierIndex) -> Result<ComplexLatticeField> {
    k.check(grid)?;
    let n = grid.side() as i64;
    // per-axis tables avoid recomputing exponentials per site
    let tables: Vec<Vec<Complex64>> = k
        .as_slice()
        .iter()
        .map(|&ki| {
            (0..n)
                .map(|p| {
                    let c = p + grid.lo();
                    let r = (ki * c).rem_euclid(n) as f64;
                    Complex64::from_polar(1.0, 2.0 * PI * r / n as f64)
                })
                .collect()
        })
        .collect();
    Ok(LatticeField::from_fn(*grid, |site| {
        let mut v = Complex64::new(1.0, 0.0);
        for (axis, t) in tables.iter().enumerate() {
            v *= t[grid.position(site, axis)];
        }
        v
    }))
}

/// `lambda_k^(N) = 4 N^2 sum_i sin^2(pi k_i / N)`, the eigenvalue of `-Delta_N` on `phi_k`.
pub fn eigenvalue_discrete(side: usize, k: &FourierIndex) -> f64 {
    let n = side as f64;
    4.0 * n * n
        * k.as_slice()
            .iter()
            .map(|&ki| (PI * ki as f64 / n).sin().powi(2))
            .sum::<f64>()
}

/// `lambda_k = 4 pi^2 |k|^2`, the eigenvalue of `-Delta` on the continuum torus.
pub fn eigenvalue_continuum(k: &FourierIndex) -> f64 {
    4.0 * PI * PI * k.norm_sq() as f64
}

/// Which Laplacian eigenvalue weights a Sobolev norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenvalueKind {
    #[default]
    Continuum,
    Discrete,
}

impl EigenvalueKind {
    pub fn eval(self, side: usize, k: &FourierIndex) -> f64 {
        match self {
            EigenvalueKind::Continuum => eigenvalue_continuum(k),
            EigenvalueKind::Discrete => eigenvalue_discrete(side, k),
        }
    }
}

/// `lambda_k^(N)` for every window index, in array order.
pub fn discrete_eigenvalue_table(grid: &TorusGrid) -> Vec<f64> {
    let n = grid.side();
    let nf = n as f64;
    let axis: Vec<f64> = (0..n)
        .map(|p| {
            let k = p as f64 + grid.lo() as f64;
            4.0 * nf * nf * (PI * k / nf).sin().powi(2)
        })
        .collect();
    (0..grid.len())
        .map(|site| (0..grid.dim()).map(|a| axis[grid.position(site, a)]).sum())
        .collect()
}

/// `(sum_{k != 0} |c(k)|^2 lambda_k^{2 beta})^{1/2}` with continuum eigenvalues.
pub fn sobolev_norm(spec: &SpectralField, beta: f64) -> f64 {
    sobolev_norm_with(spec, beta, EigenvalueKind::Continuum)
}

pub fn sobolev_norm_with(spec: &SpectralField, beta: f64, kind: EigenvalueKind) -> f64 {
    let side = spec.grid().side();
    spec.iter()
        .filter(|(k, _)| !k.is_zero())
        .map(|(k, c)| c.norm_sqr() * kind.eval(side, &k).powf(2.0 * beta))
        .sum::<f64>()
        .sqrt()
}
