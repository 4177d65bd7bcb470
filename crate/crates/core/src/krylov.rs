//! Lanczos approximation of `A^{-1/2} b` for a symmetric operator that is
//! positive definite on the mean-zero subspace.
//!
//! The Krylov basis is fully reorthogonalized (two Gram-Schmidt passes).
//! Convergence is declared when the coefficient vector `|b| f(T_m) e_1`
//! changes by less than the relative tolerance between checks.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{SolveBackend, SolveReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KrylovOptions {
    pub tol: f64,
    /// Defaults to `min(n - 1, 2000)`.
    pub max_iter: Option<usize>,
    pub check_every: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions {
            tol: 1e-6,
            max_iter: None,
            check_every: 8,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn project_mean_zero(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

/// `|b| f(T) e_1` for the tridiagonal `T` with diagonal `alpha` and off-diagonal `beta`.
fn tridiagonal_function(alpha: &[f64], beta: &[f64], bnorm: f64, f: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    let mut y = vec![0.0; m];
    for (l, &theta) in eig.eigenvalues.iter().enumerate() {
        if theta <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "Lanczos Ritz value {theta:e} is not positive; operator is not positive on the subspace"
            )));
        }
        let q = eig.eigenvectors.column(l);
        let w = bnorm * f(theta) * q[0];
        for i in 0..m {
            y[i] += w * q[i];
        }
    }
    Ok(y)
}

/// Approximates `A^{-1/2} b` with `A` given by `apply(x, out)`; `b` is projected to mean zero first.
pub fn inverse_sqrt_apply(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    opts: &KrylovOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = b.len();
    let cap = opts.max_iter.unwrap_or(2000).min(n.saturating_sub(1)).max(1);
    let mut q0 = b.to_vec();
    project_mean_zero(&mut q0);
    let bnorm = dot(&q0, &q0).sqrt();
    let mut report = SolveReport {
        iterations: 0,
        relative_residual: 0.0,
        tolerance: opts.tol,
        backend: SolveBackend::Krylov,
        preconditioned: false,
        energy: Vec::new(),
    };
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], report));
    }
    q0.iter_mut().for_each(|v| *v /= bnorm);

    let f = |x: f64| 1.0 / x.sqrt();
    let mut basis: Vec<Vec<f64>> = vec![q0];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let mut previous: Option<Vec<f64>> = None;
    let mut coeffs: Option<Vec<f64>> = None;
    let check = opts.check_every.max(1);

    for j in 0..cap {
        apply(&basis[j], &mut w);
        let a = dot(&w, &basis[j]);
        alpha.push(a);
        // two passes of classical Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&w, q);
                w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= c * qi);
            }
        }
        project_mean_zero(&mut w);
        let b_next = dot(&w, &w).sqrt();
        report.iterations = j + 1;

        let breakdown = b_next <= 1e-13 * a.abs().max(1.0);
        if breakdown || (j + 1) % check == 0 || j + 1 == cap {
            let y = tridiagonal_function(&alpha, &beta, bnorm, f)?;
            let converged = breakdown
                || match &previous {
                    Some(p) => {
                        let diff: f64 = y
                            .iter()
                            .enumerate()
                            .map(|(i, v)| (v - p.get(i).copied().unwrap_or(0.0)).powi(2))
                            .sum::<f64>()
                            .sqrt();
                        let norm = dot(&y, &y).sqrt();
                        report.relative_residual = diff / norm;
                        diff <= opts.tol * norm
                    }
                    None => false,
                };
            if converged {
                coeffs = Some(y);
                break;
            }
            previous = Some(y);
        }
        beta.push(b_next);
        basis.push(w.iter().map(|v| v / b_next).collect());
    }

    let Some(y) = coeffs else {
        return Err(Error::NotConverged(report));
    };
    let mut x = vec![0.0; n];
    for (c, q) in y.iter().zip(&basis) {
        x.iter_mut().zip(q).for_each(|(xi, qi)| *xi += c * qi);
    }
    project_mean_zero(&mut x);
    Ok((x, report))
}
