//! Mean-zero Poisson problems for `-Delta_N` and `-div(a_N grad)`.
//!
//! The homogeneous operator is diagonal in the Fourier basis and is inverted
//! exactly. The heterogeneous operator is inverted by conjugate gradients on
//! the mean-zero subspace, optionally preconditioned by the homogeneous
//! inverse. Complex right-hand sides are solved as two real systems; the two
//! recurrences stay independent but share one complex transform per
//! preconditioner application.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::environment::Conductances;
use crate::error::{Error, Result};
use crate::field::{ComplexLatticeField, LatticeField};
use crate::grid::{FourierIndex, TorusGrid};
use crate::spectral::{
    discrete_eigenvalue_table, eigenvalue_discrete, fourier_mode, transform_in_place, Direction,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveBackend {
    Spectral,
    Cg,
    Dense,
    Krylov,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub tolerance: f64,
    pub backend: SolveBackend,
    pub preconditioned: bool,
    /// Quadratic energy `J(u) = u.Au/2 - b.u` after each iteration.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub energy: Vec<f64>,
}

impl SolveReport {
    fn exact(backend: SolveBackend) -> Self {
        SolveReport {
            iterations: 0,
            relative_residual: 0.0,
            tolerance: 0.0,
            backend,
            preconditioned: false,
            energy: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioner {
    /// Spectral preconditioning for `N >= 64`, none below.
    #[default]
    Auto,
    None,
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub tol: f64,
    /// Defaults to `50 N^{d/2}`.
    pub max_iter: Option<usize>,
    pub preconditioner: Preconditioner,
    /// Relative tolerance for the mean-zero check on right-hand sides.
    pub mean_zero_tol: f64,
    pub track_energy: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            max_iter: None,
            preconditioner: Preconditioner::Auto,
            mean_zero_tol: 1e-10,
            track_energy: false,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolverOptions {
            tol,
            ..Default::default()
        }
    }

    pub fn iteration_cap(&self, grid: &TorusGrid) -> usize {
        self.max_iter.unwrap_or_else(|| {
            (50.0 * (grid.side() as f64).powf(grid.dim() as f64 / 2.0)).ceil() as usize
        })
    }

    fn use_spectral(&self, grid: &TorusGrid) -> bool {
        match self.preconditioner {
            Preconditioner::Auto => grid.side() >= 64,
            Preconditioner::None => false,
            Preconditioner::Spectral => true,
        }
    }
}

/// Either the unit-conductance Laplacian or a sampled environment.
#[derive(Debug, Clone, Copy)]
pub enum Medium<'a> {
    Homogeneous(TorusGrid),
    Environment(&'a Conductances),
}

impl Medium<'_> {
    pub fn grid(&self) -> &TorusGrid {
        match self {
            Medium::Homogeneous(g) => g,
            Medium::Environment(a) => a.grid(),
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn project_mean_zero(v: &mut [f64]) {
    let m = mean(v);
    v.iter_mut().for_each(|x| *x -= m);
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators let the compiler vectorize
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * c + l] * b[4 * c + l];
        }
    }
    let mut s = acc[0] + acc[1] + acc[2] + acc[3];
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

fn check_rhs(rhs: &LatticeField<f64>, opts: &SolverOptions) -> Result<()> {
    rhs.check_mean_zero(opts.mean_zero_tol)
}

/// Unique mean-zero `u` with `-Delta_N u = rhs`, by exact Fourier division.
pub fn solve_homogeneous(grid: &TorusGrid, rhs: &LatticeField<f64>) -> Result<LatticeField<f64>> {
    if rhs.grid() != grid {
        return Err(Error::ShapeMismatch("right-hand side on a different grid".into()));
    }
    check_rhs(rhs, &SolverOptions::default())?;
    let lam = discrete_eigenvalue_table(grid);
    let mut data: Vec<Complex64> = rhs.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    spectral_inverse_in_place(grid, &lam, &mut data);
    LatticeField::new(*grid, data.into_iter().map(|c| c.re).collect())
}

/// Divides the Fourier coefficients of `data` by `lambda_k^(N)` and drops `k = 0`.
fn spectral_inverse_in_place(grid: &TorusGrid, lam: &[f64], data: &mut [Complex64]) {
    transform_in_place(grid, data, Direction::Forward);
    for (c, &l) in data.iter_mut().zip(lam) {
        *c = if l > 0.0 { *c / l } else { Complex64::default() };
    }
    transform_in_place(grid, data, Direction::Inverse);
}

struct CgSystem {
    b: Vec<f64>,
    x: Vec<f64>,
    r: Vec<f64>,
    z: Vec<f64>,
    p: Vec<f64>,
    ap: Vec<f64>,
    rz: f64,
    bnorm: f64,
    iterations: usize,
    done: bool,
    restart: bool,
    rel: f64,
    energy: Vec<f64>,
}

struct Precond {
    lam: Option<Vec<f64>>,
    buf: Vec<Complex64>,
}

impl Precond {
    fn new(grid: &TorusGrid, spectral: bool) -> Self {
        Precond {
            lam: spectral.then(|| discrete_eigenvalue_table(grid)),
            buf: if spectral {
                vec![Complex64::default(); grid.len()]
            } else {
                Vec::new()
            },
        }
    }

    /// `z = M^{-1} r` for up to two systems at once.
    fn apply(&mut self, grid: &TorusGrid, systems: &mut [&mut CgSystem]) {
        let Some(lam) = &self.lam else {
            for s in systems.iter_mut() {
                let (r, z) = (&s.r, &mut s.z);
                z.copy_from_slice(r);
            }
            return;
        };
        debug_assert!(systems.len() <= 2);
        match systems {
            [] => {}
            [one] => {
                for (c, &v) in self.buf.iter_mut().zip(&one.r) {
                    *c = Complex64::new(v, 0.0);
                }
                spectral_inverse_in_place(grid, lam, &mut self.buf);
                for (z, c) in one.z.iter_mut().zip(&self.buf) {
                    *z = c.re;
                }
            }
            [first, second, ..] => {
                for ((c, &u), &v) in self.buf.iter_mut().zip(&first.r).zip(&second.r) {
                    *c = Complex64::new(u, v);
                }
                spectral_inverse_in_place(grid, lam, &mut self.buf);
                for ((z1, z2), c) in first.z.iter_mut().zip(second.z.iter_mut()).zip(&self.buf) {
                    *z1 = c.re;
                    *z2 = c.im;
                }
            }
        }
    }
}

/// Conjugate gradients on the mean-zero subspace for one or two right-hand sides.
fn pcg(
    a: &Conductances,
    rhs: &[&[f64]],
    guesses: &[Option<&[f64]>],
    opts: &SolverOptions,
) -> Vec<Result<(Vec<f64>, SolveReport)>> {
    let grid = *a.grid();
    let n = grid.len();
    let cap = opts.iteration_cap(&grid);
    let spectral = opts.use_spectral(&grid);
    let mut pre = Precond::new(&grid, spectral);

    let mut systems: Vec<CgSystem> = rhs
        .iter()
        .zip(guesses)
        .map(|(b, guess)| {
            let b = b.to_vec();
            let mut x = guess.map(|g| g.to_vec()).unwrap_or_else(|| vec![0.0; n]);
            project_mean_zero(&mut x);
            let mut r = vec![0.0; n];
            a.apply_into(&x, &mut r);
            for (ri, bi) in r.iter_mut().zip(&b) {
                *ri = bi - *ri;
            }
            project_mean_zero(&mut r);
            let bnorm = dot(&b, &b).sqrt();
            let rel = if bnorm > 0.0 { dot(&r, &r).sqrt() / bnorm } else { 0.0 };
            let done = bnorm == 0.0 || rel <= opts.tol;
            if bnorm == 0.0 {
                x.iter_mut().for_each(|v| *v = 0.0);
            }
            CgSystem {
                b,
                x,
                r,
                z: vec![0.0; n],
                p: vec![0.0; n],
                ap: vec![0.0; n],
                rz: 0.0,
                bnorm,
                iterations: 0,
                done,
                restart: true,
                rel,
                energy: Vec::new(),
            }
        })
        .collect();

    let refresh = |pre: &mut Precond, systems: &mut [CgSystem]| {
        let mut active: Vec<&mut CgSystem> = systems.iter_mut().filter(|s| !s.done).collect();
        for chunk in active.chunks_mut(2) {
            pre.apply(&grid, chunk);
        }
        for s in active {
            let rz_new = dot(&s.r, &s.z);
            if s.restart {
                s.p.copy_from_slice(&s.z);
                s.restart = false;
            } else {
                let beta = rz_new / s.rz;
                for (p, &z) in s.p.iter_mut().zip(&s.z) {
                    *p = z + beta * *p;
                }
            }
            s.rz = rz_new;
        }
    };

    refresh(&mut pre, &mut systems);
    let mut it = 0;
    while it < cap && systems.iter().any(|s| !s.done) {
        it += 1;
        for s in systems.iter_mut().filter(|s| !s.done) {
            a.apply_into(&s.p, &mut s.ap);
            let pap = dot(&s.p, &s.ap);
            if pap <= 0.0 || !pap.is_finite() {
                // the search direction left the range of the operator
                s.restart = true;
                continue;
            }
            let alpha = s.rz / pap;
            for i in 0..n {
                s.x[i] += alpha * s.p[i];
                s.r[i] -= alpha * s.ap[i];
            }
            project_mean_zero(&mut s.x);
            project_mean_zero(&mut s.r);
            s.iterations += 1;
            if opts.track_energy {
                // with A x = b - r the energy is -x.(b + r)/2
                let e: f64 = s.x.iter().zip(&s.b).zip(&s.r).map(|((x, b), r)| x * (b + r)).sum();
                s.energy.push(-0.5 * e);
            }
            s.rel = dot(&s.r, &s.r).sqrt() / s.bnorm;
            if s.rel <= opts.tol {
                // confirm against the true residual before stopping
                a.apply_into(&s.x, &mut s.ap);
                for i in 0..n {
                    s.r[i] = s.b[i] - s.ap[i];
                }
                project_mean_zero(&mut s.r);
                s.rel = dot(&s.r, &s.r).sqrt() / s.bnorm;
                if s.rel <= opts.tol {
                    s.done = true;
                } else {
                    s.restart = true;
                }
            }
        }
        refresh(&mut pre, &mut systems);
    }

    systems
        .into_iter()
        .map(|s| {
            let report = SolveReport {
                iterations: s.iterations,
                relative_residual: s.rel,
                tolerance: opts.tol,
                backend: SolveBackend::Cg,
                preconditioned: spectral,
                energy: s.energy,
            };
            if s.done {
                Ok((s.x, report))
            } else {
                Err(Error::NotConverged(report))
            }
        })
        .collect()
}

/// Mean-zero `u` with `-div(a_N grad u) = rhs` to relative residual `opts.tol`.
pub fn solve_heterogeneous(
    a: &Conductances,
    rhs: &LatticeField<f64>,
    opts: &SolverOptions,
) -> Result<(LatticeField<f64>, SolveReport)> {
    solve_heterogeneous_from(a, rhs, None, opts)
}

/// As [`solve_heterogeneous`], starting from `guess`.
pub fn solve_heterogeneous_from(
    a: &Conductances,
    rhs: &LatticeField<f64>,
    guess: Option<&LatticeField<f64>>,
    opts: &SolverOptions,
) -> Result<(LatticeField<f64>, SolveReport)> {
    ensure_grid(a, rhs)?;
    if let Some(g) = guess {
        ensure_grid(a, g)?;
    }
    if opts.tol <= 0.0 || !opts.tol.is_finite() {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", opts.tol)));
    }
    check_rhs(rhs, opts)?;
    let mut out = pcg(a, &[rhs.values()], &[guess.map(|g| g.values())], opts);
    let (x, report) = out.pop().expect("one system")?;
    Ok((LatticeField::new(*a.grid(), x)?, report))
}

/// Solves two real systems with shared preconditioner transforms.
pub fn solve_heterogeneous_pair(
    a: &Conductances,
    rhs: [&LatticeField<f64>; 2],
    guess: [Option<&LatticeField<f64>>; 2],
    opts: &SolverOptions,
) -> Result<[(LatticeField<f64>, SolveReport); 2]> {
    for f in rhs.iter().copied().chain(guess.iter().flatten().copied()) {
        ensure_grid(a, f)?;
    }
    for f in rhs {
        check_rhs(f, opts)?;
    }
    let mut out = pcg(
        a,
        &[rhs[0].values(), rhs[1].values()],
        &[guess[0].map(|g| g.values()), guess[1].map(|g| g.values())],
        opts,
    );
    let second = out.pop().expect("two systems")?;
    let first = out.pop().expect("two systems")?;
    let grid = *a.grid();
    Ok([
        (LatticeField::new(grid, first.0)?, first.1),
        (LatticeField::new(grid, second.0)?, second.1),
    ])
}

fn ensure_grid(a: &Conductances, f: &LatticeField<f64>) -> Result<()> {
    if f.grid() != a.grid() {
        return Err(Error::ShapeMismatch(format!(
            "field on {:?} but environment on {:?}",
            f.grid(),
            a.grid()
        )));
    }
    Ok(())
}

/// Right-hand side `delta_y - N^{-d}` of the Green's function equation.
pub fn green_rhs(grid: &TorusGrid, site: usize) -> LatticeField<f64> {
    let n = grid.len() as f64;
    LatticeField::from_fn(*grid, |x| if x == site { 1.0 - 1.0 / n } else { -1.0 / n })
}

/// Column `G(., y)`: the mean-zero solution of `-div(a_N grad G(., y)) = delta_y - N^{-d}`.
pub fn green_column(medium: Medium<'_>, site: usize, opts: &SolverOptions) -> Result<LatticeField<f64>> {
    let grid = *medium.grid();
    if site >= grid.len() {
        return Err(Error::InvalidArgument(format!("site {site} outside the grid")));
    }
    let rhs = green_rhs(&grid, site);
    match medium {
        Medium::Homogeneous(g) => solve_homogeneous(&g, &rhs),
        Medium::Environment(a) => solve_heterogeneous(a, &rhs, opts).map(|(u, _)| u),
    }
}

/// `phi^N_k`: the mean-zero solution of `-div(a_N grad phi) = ahom lambda_k^(N) phi_k`.
pub fn pseudo_eigenfunction(
    a: &Conductances,
    ahom: f64,
    k: &FourierIndex,
    opts: &SolverOptions,
) -> Result<ComplexLatticeField> {
    pseudo_eigenfunction_with_reports(a, ahom, k, opts).map(|(f, _)| f)
}

pub fn pseudo_eigenfunction_with_reports(
    a: &Conductances,
    ahom: f64,
    k: &FourierIndex,
    opts: &SolverOptions,
) -> Result<(ComplexLatticeField, [SolveReport; 2])> {
    let grid = *a.grid();
    k.check(&grid)?;
    if k.is_zero() {
        return Err(Error::InvalidArgument("pseudo-eigenfunction needs k != 0".into()));
    }
    if !(ahom > 0.0 && ahom.is_finite()) {
        return Err(Error::InvalidArgument(format!("effective coefficient must be positive, got {ahom}")));
    }
    let phi = fourier_mode(&grid, k)?;
    let scale = ahom * eigenvalue_discrete(grid.side(), k);
    // modes with 2k = 0 mod N are real; drop the roundoff in their imaginary part
    let real_mode = k.as_slice().iter().all(|&c| (2 * c).rem_euclid(grid.side() as i64) == 0);
    let re = phi.re().centered();
    let im = if real_mode {
        LatticeField::zeros(grid)
    } else {
        phi.im().centered()
    };
    let rhs_re = re.scaled(scale);
    let rhs_im = im.scaled(scale);
    let [(u_re, rep_re), (u_im, rep_im)] =
        solve_heterogeneous_pair(a, [&rhs_re, &rhs_im], [Some(&re), Some(&im)], opts)?;
    Ok((LatticeField::from_parts(&u_re, &u_im)?, [rep_re, rep_im]))
}

/// Dense reference solvers for small grids.
pub mod dense {
    use nalgebra::{DMatrix, DVector, SymmetricEigen};

    use super::*;

    /// Matrix of `-div(a_N grad)` in the site basis.
    pub fn operator_matrix(medium: Medium<'_>) -> DMatrix<f64> {
        let grid = *medium.grid();
        let n = grid.len();
        let unit;
        let a = match medium {
            Medium::Homogeneous(g) => {
                unit = Conductances::constant(g, 1.0).expect("unit conductances are elliptic");
                &unit
            }
            Medium::Environment(a) => a,
        };
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            a.apply_into(&e, &mut col);
            e[j] = 0.0;
            for i in 0..n {
                m[(i, j)] = col[i];
            }
        }
        m
    }

    /// Symmetric eigendecomposition with the constant kernel removed.
    pub struct Spectrum {
        pub eigen: SymmetricEigen<f64, nalgebra::Dyn>,
        pub cutoff: f64,
    }

    impl Spectrum {
        pub fn new(m: DMatrix<f64>) -> Self {
            let eigen = SymmetricEigen::new(m);
            let top = eigen.eigenvalues.iter().cloned().fold(0.0, f64::max);
            Spectrum {
                eigen,
                cutoff: 1e-9 * top,
            }
        }

        /// `f(A)` restricted to the range of `A`.
        pub fn function(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
            let q = &self.eigen.eigenvectors;
            let vals = self
                .eigen
                .eigenvalues
                .map(|l| if l > self.cutoff { f(l) } else { 0.0 });
            q * DMatrix::from_diagonal(&vals) * q.transpose()
        }

        pub fn pseudo_inverse(&self) -> DMatrix<f64> {
            self.function(|l| 1.0 / l)
        }

        pub fn pseudo_inverse_sqrt(&self) -> DMatrix<f64> {
            self.function(|l| 1.0 / l.sqrt())
        }
    }

    /// Mean-zero solve through a Cholesky factorization of `A + c 11^T`.
    pub struct DenseSolver {
        grid: TorusGrid,
        factor: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    }

    impl DenseSolver {
        pub fn new(medium: Medium<'_>) -> Result<Self> {
            let grid = *medium.grid();
            let mut m = operator_matrix(medium);
            let shift = m.diagonal().mean() / grid.len() as f64;
            m.add_scalar_mut(shift);
            let factor = m
                .cholesky()
                .ok_or_else(|| Error::InvalidArgument("operator is not positive on the mean-zero subspace".into()))?;
            Ok(DenseSolver { grid, factor })
        }

        pub fn solve(&self, rhs: &LatticeField<f64>) -> Result<(LatticeField<f64>, SolveReport)> {
            if rhs.grid() != &self.grid {
                return Err(Error::ShapeMismatch("right-hand side on a different grid".into()));
            }
            check_rhs(rhs, &SolverOptions::default())?;
            let b = DVector::from_column_slice(rhs.values());
            let mut x = self.factor.solve(&b);
            let m = x.mean();
            x.add_scalar_mut(-m);
            Ok((LatticeField::new(self.grid, x.as_slice().to_vec())?, SolveReport::exact(SolveBackend::Dense)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::dense::*;
    use super::*;
    use crate::environment::{sample_environment, EnvironmentLaw};
    use crate::seed::Seed;
    use nalgebra::DVector;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random_mean_zero(grid: TorusGrid, seed: u64) -> LatticeField<f64> {
        let mut rng = Seed(seed).rng();
        LatticeField::from_fn(grid, |_| rng.sample::<f64, _>(StandardNormal)).centered()
    }

    fn max_diff(a: &LatticeField<f64>, b: &LatticeField<f64>) -> f64 {
        a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn homogeneous_solve_of_mode_divides_by_eigenvalue() {
        let g = TorusGrid::new(8, 2).unwrap();
        let k = FourierIndex::from([1, -3]);
        let phi = fourier_mode(&g, &k).unwrap();
        let lam = eigenvalue_discrete(8, &k);
        let u = solve_homogeneous(&g, &phi.re()).unwrap();
        assert!(max_diff(&u, &phi.re().scaled(1.0 / lam)) < 1e-14);
        let zero = solve_homogeneous(&g, &LatticeField::zeros(g)).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
        assert!(matches!(
            solve_homogeneous(&g, &LatticeField::constant(g, 1.0)),
            Err(Error::NotMeanZero { .. })
        ));
    }

    #[test]
    fn homogeneous_solve_matches_dense_pseudo_inverse() {
        let g = TorusGrid::new(8, 2).unwrap();
        let rhs = random_mean_zero(g, 11);
        let pinv = Spectrum::new(operator_matrix(Medium::Homogeneous(g))).pseudo_inverse();
        let expect = &pinv * DVector::from_column_slice(rhs.values());
        let u = solve_homogeneous(&g, &rhs).unwrap();
        let err = u.values().iter().zip(expect.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9 * expect.amax(), "{err}");
    }

    #[test]
    fn unit_conductance_cg_reduces_to_homogeneous() {
        let g = TorusGrid::new(16, 2).unwrap();
        let a = Conductances::constant(g, 1.0).unwrap();
        let k = FourierIndex::from([2, 1]);
        let rhs = fourier_mode(&g, &k).unwrap().im();
        for pre in [Preconditioner::None, Preconditioner::Spectral] {
            let opts = SolverOptions {
                preconditioner: pre,
                ..Default::default()
            };
            let (u, rep) = solve_heterogeneous(&a, &rhs, &opts).unwrap();
            let expect = rhs.scaled(1.0 / eigenvalue_discrete(16, &k));
            assert!(max_diff(&u, &expect) < 1e-8 * expect.max_abs());
            assert!(rep.relative_residual <= 1e-8);
        }
    }

    #[test]
    fn one_dimensional_solution_matches_resistor_formula() {
        // On a ring the flux j is constant along each edge up to the
        // accumulated source: N^2 a_e (u_x - u_{x+1}) = J - sum_{y <= x} f_y ... so
        // u increments are (S_x - J) / (N^2 a_e) with S the partial sums of the rhs.
        let n = 16;
        let g = TorusGrid::new(n, 1).unwrap();
        let a = sample_environment(&EnvironmentLaw::uniform(1.0, 5.0), &g, Seed(4)).unwrap();
        let rhs = random_mean_zero(g, 5);
        let (u, _) = solve_heterogeneous(&a, &rhs, &SolverOptions::with_tol(1e-12)).unwrap();

        let n2 = (n * n) as f64;
        // flux F_x through edge (x, x+1): F_x - F_{x-1} = rhs_x, F_x = F_{-1} + S_x
        let partial: Vec<f64> = rhs
            .values()
            .iter()
            .scan(0.0, |s, v| {
                *s += v;
                Some(*s)
            })
            .collect();
        // zero total drop around the ring fixes the circulating flux F0
        let res: Vec<f64> = (0..n).map(|x| 1.0 / (n2 * a.get(x, 0))).collect();
        let f0 = -partial.iter().zip(&res).map(|(s, r)| s * r).sum::<f64>() / res.iter().sum::<f64>();
        let mut oracle = vec![0.0; n];
        for x in 0..n - 1 {
            // u_x - u_{x+1} = F_x / (N^2 a_x)
            oracle[x + 1] = oracle[x] - (f0 + partial[x]) * res[x];
        }
        let oracle = LatticeField::new(g, oracle).unwrap().centered();
        assert!(max_diff(&u, &oracle) < 1e-9 * oracle.max_abs());
    }

    #[test]
    fn cg_energy_is_non_increasing_and_residual_contract_holds() {
        let g = TorusGrid::new(32, 2).unwrap();
        let a = sample_environment(&EnvironmentLaw::uniform(1.0, 10.0), &g, Seed(12)).unwrap();
        let rhs = random_mean_zero(g, 13);
        for pre in [Preconditioner::None, Preconditioner::Spectral] {
            let opts = SolverOptions {
                preconditioner: pre,
                track_energy: true,
                ..Default::default()
            };
            let (u, rep) = solve_heterogeneous(&a, &rhs, &opts).unwrap();
            for w in rep.energy.windows(2) {
                assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0), "{} > {}", w[1], w[0]);
            }
            let res = a.apply(&u).unwrap().sub(&rhs).unwrap();
            assert!(res.norm() <= opts.tol * rhs.norm() * 1.0001);
            assert!(u.is_mean_zero(1e-10));
        }
    }

    #[test]
    fn preconditioning_cuts_iterations() {
        let g = TorusGrid::new(64, 2).unwrap();
        let a = sample_environment(&EnvironmentLaw::bernoulli(0.5, 1.0, 2.0), &g, Seed(1)).unwrap();
        let rhs = random_mean_zero(g, 2);
        let plain = SolverOptions {
            preconditioner: Preconditioner::None,
            ..Default::default()
        };
        let (_, r0) = solve_heterogeneous(&a, &rhs, &plain).unwrap();
        let (_, r1) = solve_heterogeneous(&a, &rhs, &SolverOptions::default()).unwrap();
        assert!(r1.preconditioned);
        assert!(r1.iterations * 4 < r0.iterations, "{} vs {}", r1.iterations, r0.iterations);
    }

    #[test]
    fn non_convergence_is_reported() {
        let g = TorusGrid::new(16, 2).unwrap();
        let a = sample_environment(&EnvironmentLaw::uniform(1.0, 2.0), &g, Seed(3)).unwrap();
        let opts = SolverOptions {
            max_iter: Some(2),
            preconditioner: Preconditioner::None,
            ..Default::default()
        };
        match solve_heterogeneous(&a, &random_mean_zero(g, 1), &opts) {
            Err(Error::NotConverged(rep)) => assert_eq!(rep.iterations, 2),
            other => panic!("expected failure, got {other:?}"),
        }
        assert!(solve_heterogeneous(&a, &LatticeField::constant(g, 1.0), &SolverOptions::default()).is_err());
    }

    #[test]
    fn all_solvers_agree_with_dense_pseudo_inverse() {
        for (n, d) in [(8, 2), (8, 1), (5, 2)] {
            let g = TorusGrid::new(n, d).unwrap();
            let a = sample_environment(&EnvironmentLaw::uniform(1.0, 3.0), &g, Seed(n as u64)).unwrap();
            let rhs = random_mean_zero(g, 99);
            let pinv = Spectrum::new(operator_matrix(Medium::Environment(&a))).pseudo_inverse();
            let expect = LatticeField::new(g, (&pinv * DVector::from_column_slice(rhs.values())).as_slice().to_vec()).unwrap();
            let tight = SolverOptions::with_tol(1e-12);
            let (cg, _) = solve_heterogeneous(&a, &rhs, &tight).unwrap();
            let (dn, _) = DenseSolver::new(Medium::Environment(&a)).unwrap().solve(&rhs).unwrap();
            assert!(max_diff(&cg, &expect) < 1e-8 * expect.max_abs());
            assert!(max_diff(&dn, &expect) < 1e-8 * expect.max_abs());

            let pinv0 = Spectrum::new(operator_matrix(Medium::Homogeneous(g))).pseudo_inverse();
            let e0 = (&pinv0 * DVector::from_column_slice(rhs.values())).as_slice().to_vec();
            let sp = solve_homogeneous(&g, &rhs).unwrap();
            assert!(max_diff(&sp, &LatticeField::new(g, e0).unwrap()) < 1e-8 * sp.max_abs());
        }
    }

    #[test]
    fn green_function_properties() {
        let g = TorusGrid::new(6, 2).unwrap();
        let a = sample_environment(&EnvironmentLaw::uniform(1.0, 4.0), &g, Seed(21)).unwrap();
        let opts = SolverOptions::with_tol(1e-12);
        let cols: Vec<_> = (0..g.len())
            .map(|y| green_column(Medium::Environment(&a), y, &opts).unwrap())
            .collect();
        for x in 0..g.len() {
            for y in 0..g.len() {
                assert!((cols[y].get(x) - cols[x].get(y)).abs() < 1e-9 * cols[0].max_abs());
            }
        }
        for c in &cols {
            assert!(c.mean().abs() < 1e-12 * c.max_abs());
        }
    }

    #[test]
    fn homogeneous_green_function_is_the_spectral_sum() {
        let g = TorusGrid::new(6, 2).unwrap();
        let y = 9;
        let col = green_column(Medium::Homogeneous(g), y, &SolverOptions::default()).unwrap();
        let yc = g.coords(y);
        let nd = g.len() as f64;
        for x in 0..g.len() {
            let xc = g.coords(x);
            let mut s = 0.0;
            for k in g.fourier_indices().filter(|k| !k.is_zero()) {
                let phase: f64 = k.as_slice().iter().zip(xc.iter().zip(&yc)).map(|(ki, (a, b))| *ki as f64 * (a - b) as f64).sum();
                s += (2.0 * std::f64::consts::PI * phase / 6.0).cos() / eigenvalue_discrete(6, &k);
            }
            assert!((col.get(x) - s / nd).abs() < 1e-12, "{x}");
        }
        let unit = Conductances::constant(g, 1.0).unwrap();
        let het = green_column(Medium::Environment(&unit), y, &SolverOptions::with_tol(1e-13)).unwrap();
        assert!(max_diff(&het, &col) < 1e-10 * col.max_abs());
    }

    #[test]
    fn pseudo_eigenfunction_of_constant_medium_is_the_mode() {
        let g = TorusGrid::new(16, 2).unwrap();
        let a = Conductances::constant(g, 1.7).unwrap();
        let k = FourierIndex::from([1, 2]);
        let phi = fourier_mode(&g, &k).unwrap();
        let u = pseudo_eigenfunction(&a, 1.7, &k, &SolverOptions::default()).unwrap();
        let err = u.sub(&phi).unwrap().max_abs();
        assert!(err < 1e-8, "{err}");
        assert!(pseudo_eigenfunction(&a, 1.7, &FourierIndex::zero(2), &SolverOptions::default()).is_err());
        assert!(pseudo_eigenfunction(&a, 0.0, &k, &SolverOptions::default()).is_err());
    }

    #[test]
    fn pseudo_eigenfunction_residual_contract() {
        let g = TorusGrid::new(16, 2).unwrap();
        let a = sample_environment(&EnvironmentLaw::bernoulli(0.5, 1.0, 2.0), &g, Seed(31)).unwrap();
        let k = FourierIndex::from([1, 0]);
        let opts = SolverOptions::default();
        let ahom = 2f64.sqrt();
        let u = pseudo_eigenfunction(&a, ahom, &k, &opts).unwrap();
        let target = fourier_mode(&g, &k).unwrap().scaled(ahom * eigenvalue_discrete(16, &k));
        let lhs = LatticeField::from_parts(&a.apply(&u.re()).unwrap(), &a.apply(&u.im()).unwrap()).unwrap();
        let rel = lhs.sub(&target).unwrap().norm() / target.norm();
        assert!(rel <= 1.5 * opts.tol, "{rel}");
        assert!(u.is_mean_zero(1e-10));
    }
}
