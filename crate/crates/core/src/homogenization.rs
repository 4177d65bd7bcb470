//! Periodic correctors and representative-volume estimates of the effective
//! coefficient.
//!
//! Gradients are forward differences in macroscopic units,
//! `grad_i f(x) = N (f(x + e_i/N) - f(x))`, so the corrector equation reads
//! `-div(a grad chi_i) = div(a e_i)` with right-hand side
//! `N (a(x, i) - a(x - e_i/N, i))`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::{sample_environment, Conductances, EnvironmentLaw};
use crate::error::{Error, Result};
use crate::field::LatticeField;
use crate::grid::TorusGrid;
use crate::seed::{tags, Seed};
use crate::solver::{solve_heterogeneous, SolveReport, SolverOptions};

#[derive(Debug, Clone)]
pub struct CorrectorSolution {
    pub direction: usize,
    pub chi: LatticeField<f64>,
    pub residual: f64,
    pub report: SolveReport,
}

/// `div(a e_i)`, the corrector right-hand side. Sums to zero by telescoping.
pub fn corrector_rhs(a: &Conductances, axis: usize) -> Result<LatticeField<f64>> {
    let grid = *a.grid();
    check_axis(&grid, axis)?;
    let n = grid.side() as f64;
    let w = a.axis(axis);
    Ok(LatticeField::from_fn(grid, |x| {
        let back = grid.neighbor(x, axis, false);
        n * (w[x] - w[back])
    }))
}

fn check_axis(grid: &TorusGrid, axis: usize) -> Result<()> {
    if axis >= grid.dim() {
        return Err(Error::InvalidArgument(format!(
            "axis {axis} out of range for dimension {}",
            grid.dim()
        )));
    }
    Ok(())
}

pub fn solve_corrector(a: &Conductances, axis: usize, opts: &SolverOptions) -> Result<CorrectorSolution> {
    let rhs = corrector_rhs(a, axis)?;
    if rhs.max_abs() == 0.0 {
        return Ok(CorrectorSolution {
            direction: axis,
            chi: LatticeField::zeros(*a.grid()),
            residual: 0.0,
            report: SolveReport {
                iterations: 0,
                relative_residual: 0.0,
                tolerance: opts.tol,
                backend: crate::solver::SolveBackend::Cg,
                preconditioned: false,
                energy: Vec::new(),
            },
        });
    }
    let (chi, report) = solve_heterogeneous(a, &rhs, opts)?;
    Ok(CorrectorSolution {
        direction: axis,
        residual: report.relative_residual,
        chi,
        report,
    })
}

pub fn solve_correctors(a: &Conductances, opts: &SolverOptions) -> Result<Vec<CorrectorSolution>> {
    (0..a.grid().dim()).map(|i| solve_corrector(a, i, opts)).collect()
}

fn check_correctors(a: &Conductances, correctors: &[CorrectorSolution]) -> Result<()> {
    let d = a.grid().dim();
    if correctors.len() != d {
        return Err(Error::ShapeMismatch(format!("expected {d} correctors, got {}", correctors.len())));
    }
    for (i, c) in correctors.iter().enumerate() {
        if c.direction != i {
            return Err(Error::ShapeMismatch(format!("corrector {i} solved for axis {}", c.direction)));
        }
        c.chi.ensure_same_grid(&LatticeField::<f64>::zeros(*a.grid()))?;
    }
    Ok(())
}

/// Forward difference `N (f(x + e_j/N) - f(x))` at every site.
fn gradient(f: &LatticeField<f64>, axis: usize) -> Vec<f64> {
    let grid = f.grid();
    let n = grid.side() as f64;
    let v = f.values();
    (0..grid.len())
        .map(|x| n * (v[grid.neighbor(x, axis, true)] - v[x]))
        .collect()
}

/// Energy matrix `(1/N^d) sum_x sum_l a(x,l) (delta_il + grad_l chi_i)(delta_jl + grad_l chi_j)`.
pub fn effective_matrix(a: &Conductances, correctors: &[CorrectorSolution]) -> Result<Vec<Vec<f64>>> {
    check_correctors(a, correctors)?;
    let grid = a.grid();
    let d = grid.dim();
    let n = grid.len() as f64;
    // grads[i][l] = grad_l chi_i
    let grads: Vec<Vec<Vec<f64>>> = correctors
        .iter()
        .map(|c| (0..d).map(|l| gradient(&c.chi, l)).collect())
        .collect();
    let mut m = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in i..d {
            let mut s = 0.0;
            for l in 0..d {
                let w = a.axis(l);
                let (gi, gj) = (&grads[i][l], &grads[j][l]);
                let (di, dj) = ((i == l) as u8 as f64, (j == l) as u8 as f64);
                s += w
                    .iter()
                    .zip(gi.iter().zip(gj))
                    .map(|(w, (p, q))| w * (di + p) * (dj + q))
                    .sum::<f64>();
            }
            m[i][j] = s / n;
            m[j][i] = s / n;
        }
    }
    Ok(m)
}

/// Scalar effective coefficient of one environment: the trace of the energy matrix over `d`.
pub fn effective_sample(a: &Conductances, correctors: &[CorrectorSolution]) -> Result<f64> {
    let m = effective_matrix(a, correctors)?;
    Ok((0..m.len()).map(|i| m[i][i]).sum::<f64>() / m.len() as f64)
}

/// Flux form `(1/d) sum_i (1/N^d) sum_x a(x,i) (1 + grad_i chi_i(x))`.
pub fn effective_sample_flux(a: &Conductances, correctors: &[CorrectorSolution]) -> Result<f64> {
    check_correctors(a, correctors)?;
    let grid = a.grid();
    let d = grid.dim();
    let total: f64 = correctors
        .iter()
        .map(|c| {
            let g = gradient(&c.chi, c.direction);
            a.axis(c.direction).iter().zip(&g).map(|(w, g)| w * (1.0 + g)).sum::<f64>()
        })
        .sum();
    Ok(total / (d as f64 * grid.len() as f64))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicateFailure {
    pub replicate: usize,
    pub message: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub value: f64,
    /// One report per corrector direction.
    pub solves: Vec<SolveReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AhomEstimate {
    pub law: EnvironmentLaw,
    pub dim: usize,
    pub side: usize,
    /// Requested replicate count.
    pub replicates: usize,
    pub mean: f64,
    pub stderr: f64,
    pub seed: u64,
    /// Per-replicate effective samples of the successful replicates, in replicate order.
    pub samples: Vec<f64>,
    pub failures: Vec<ReplicateFailure>,
    /// Replicate-averaged energy matrix.
    pub matrix: Vec<Vec<f64>>,
    pub records: Vec<ReplicateRecord>,
}

impl AhomEstimate {
    pub const CSV_HEADER: [&'static str; 7] = ["law", "d", "N", "M", "ahom_mean", "ahom_stderr", "seed"];

    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.law.to_string(),
            self.dim.to_string(),
            self.side.to_string(),
            self.replicates.to_string(),
            format!("{:.12e}", self.mean),
            format!("{:.12e}", self.stderr),
            self.seed.to_string(),
        ]
    }
}

/// Environment seed of replicate `r` in an effective-coefficient run.
pub fn replicate_seed(seed: Seed, r: usize) -> Seed {
    seed.derive_path(&[tags::REPLICATE, r as u64])
}

/// Monte-Carlo mean and standard error of [`effective_sample`] over `m` environments.
pub fn estimate_ahom(
    law: &EnvironmentLaw,
    grid: &TorusGrid,
    m: usize,
    seed: Seed,
    opts: &SolverOptions,
) -> Result<AhomEstimate> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 replicates, got {m}")));
    }
    let outcomes: Vec<Result<(f64, Vec<Vec<f64>>, Vec<SolveReport>)>> = (0..m)
        .into_par_iter()
        .map(|r| {
            let a = sample_environment(law, grid, replicate_seed(seed, r))?;
            let c = solve_correctors(&a, opts)?;
            let mat = effective_matrix(&a, &c)?;
            let s = (0..mat.len()).map(|i| mat[i][i]).sum::<f64>() / mat.len() as f64;
            Ok((s, mat, c.into_iter().map(|c| c.report).collect()))
        })
        .collect();

    let d = grid.dim();
    let mut samples = Vec::with_capacity(m);
    let mut failures = Vec::new();
    let mut matrix = vec![vec![0.0; d]; d];
    let mut records = Vec::with_capacity(m);
    for (r, out) in outcomes.into_iter().enumerate() {
        match out {
            Ok((s, mat, solves)) => {
                samples.push(s);
                records.push(ReplicateRecord {
                    replicate: r,
                    value: s,
                    solves,
                });
                for i in 0..d {
                    for j in 0..d {
                        matrix[i][j] += mat[i][j];
                    }
                }
            }
            Err(e @ Error::NotConverged(_)) => failures.push(ReplicateFailure {
                replicate: r,
                message: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    if 2 * samples.len() < m {
        return Err(failures
            .first()
            .map(|f| Error::Assertion(format!("{} of {m} replicates failed; first: {}", failures.len(), f.message)))
            .unwrap_or_else(|| Error::Assertion("too few replicates".into())));
    }
    let k = samples.len() as f64;
    matrix.iter_mut().flatten().for_each(|v| *v /= k);
    let (mean, stderr) = mean_stderr(&samples);
    Ok(AhomEstimate {
        law: *law,
        dim: d,
        side: grid.side(),
        replicates: m,
        mean,
        stderr,
        seed: seed.0,
        samples,
        failures,
        matrix,
        records,
    })
}

/// Sample mean and `s / sqrt(M)` with the unbiased sample deviation.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    if let Some(&first) = xs.first() {
        if xs.iter().all(|&x| x == first) {
            return (first, if xs.len() < 2 { f64::NAN } else { 0.0 });
        }
    }
    let mean = xs.iter().sum::<f64>() / m;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tight() -> SolverOptions {
        SolverOptions::with_tol(1e-11)
    }

    #[test]
    fn constant_environment_has_zero_corrector() {
        let g = TorusGrid::new(8, 2).unwrap();
        let a = Conductances::constant(g, 1.5).unwrap();
        let c = solve_correctors(&a, &tight()).unwrap();
        assert!(c.iter().all(|c| c.chi.max_abs() == 0.0));
        assert!((effective_sample(&a, &c).unwrap() - 1.5).abs() < 1e-12);
        assert!((effective_sample_flux(&a, &c).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn corrector_rhs_is_mean_zero() {
        let g = TorusGrid::new(12, 3).unwrap();
        let a = sample_environment(&EnvironmentLaw::uniform(1.0, 9.0), &g, Seed(3)).unwrap();
        for i in 0..3 {
            let rhs = corrector_rhs(&a, i).unwrap();
            assert!(rhs.mean().abs() < 1e-13 * rhs.max_abs());
        }
        assert!(corrector_rhs(&a, 3).is_err());
    }

    #[test]
    fn one_dimensional_flux_is_constant_harmonic_mean() {
        let g = TorusGrid::new(64, 1).unwrap();
        let a = sample_environment(&EnvironmentLaw::uniform(1.0, 4.0), &g, Seed(8)).unwrap();
        let c = solve_correctors(&a, &tight()).unwrap();
        let grad = gradient(&c[0].chi, 0);
        let harmonic = 1.0 / (a.axis(0).iter().map(|w| 1.0 / w).sum::<f64>() / 64.0);
        for (w, g) in a.axis(0).iter().zip(&grad) {
            assert!((w * (1.0 + g) - harmonic).abs() < 1e-8);
        }
        assert!((effective_sample(&a, &c).unwrap() - harmonic).abs() < 1e-9);
    }

    #[test]
    fn energy_and_flux_forms_agree_within_sandwich() {
        let g = TorusGrid::new(16, 2).unwrap();
        let a = sample_environment(&EnvironmentLaw::bernoulli(0.5, 1.0, 2.0), &g, Seed(1)).unwrap();
        let c = solve_correctors(&a, &tight()).unwrap();
        let e = effective_sample(&a, &c).unwrap();
        let f = effective_sample_flux(&a, &c).unwrap();
        assert!((e - f).abs() < 1e-8, "{e} {f}");
        assert!(e >= a.min() && e <= a.max());
        let mat = effective_matrix(&a, &c).unwrap();
        assert!((mat[0][1] - mat[1][0]).abs() < 1e-14);
    }

    #[test]
    fn estimate_of_constant_law_is_exact() {
        let g = TorusGrid::new(8, 2).unwrap();
        let est = estimate_ahom(&EnvironmentLaw::constant(1.5), &g, 4, Seed(0), &tight()).unwrap();
        assert!((est.mean - 1.5).abs() < 1e-10);
        assert_eq!(est.stderr, 0.0);
        assert!(estimate_ahom(&EnvironmentLaw::constant(1.5), &g, 1, Seed(0), &tight()).is_err());
    }

    #[test]
    fn stderr_is_sample_deviation_over_root_m() {
        let (m, s) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }
}
