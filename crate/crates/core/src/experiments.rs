//! Monte-Carlo convergence experiments and closed-form per-mode cross-checks.
//!
//! Environments at every side `N` of an experiment are projections `Pi_N` of
//! one environment sampled on the largest configured grid, so the ladder of
//! sizes is coupled the same way the discrete fields are.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::environment::{sample_environment, Conductances, EnvironmentLaw};
use crate::error::{Error, Result};
use crate::field::LatticeField;
use crate::grid::{FourierIndex, TorusGrid};
use crate::homogenization::{estimate_ahom, mean_stderr};
use crate::krylov::KrylovOptions;
use crate::sampler::{formal_field, sample_bilaplacian, sample_noise, FieldKind, FieldSample, GffBackend, GffSampler};
use crate::seed::Seed;
use crate::solver::{pseudo_eigenfunction, Medium, SolverOptions};
use crate::spectral::{eigenvalue_continuum, eigenvalue_discrete, fourier_mode, sobolev_norm_with, EigenvalueKind};

/// Stream identifiers mixed into the master seed of each experiment.
pub mod ids {
    pub const PSEUDO_EIGEN: u64 = 1;
    pub const GFF_COVARIANCE: u64 = 2;
    pub const BILAP_ERROR: u64 = 3;
    pub const AHOM: u64 = 4;
    pub const ENVIRONMENT: u64 = 10;
    pub const NOISE: u64 = 11;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// 95% Student-t half-width of the slope.
    pub half_width: f64,
    pub points: usize,
}

impl RateFit {
    pub fn within(&self, target: f64, tol: f64) -> bool {
        (self.slope - target).abs() <= tol
    }
}

/// Ordinary least squares of `log value` against `log N`.
pub fn fit_rate(sides: &[f64], values: &[f64]) -> Result<RateFit> {
    if sides.len() != values.len() {
        return Err(Error::ShapeMismatch("sides and values differ in length".into()));
    }
    if sides.len() < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 points, got {}", sides.len())));
    }
    if let Some(v) = values.iter().chain(sides).find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument(format!("log-log fit needs positive values, got {v}")));
    }
    let x: Vec<f64> = sides.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("sides must not all be equal".into()));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(&y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let dof = n - 2.0;
    let se = (rss / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(RateFit {
        slope,
        intercept,
        half_width: t * se,
        points: x.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub side: usize,
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSeries {
    pub quantity: String,
    pub dim: usize,
    pub points: Vec<RatePoint>,
    /// Fit of the raw values.
    pub raw_fit: Option<RateFit>,
    /// Fit used for assertions: `value / ln N` in two dimensions when `log_corrected`.
    pub fit: Option<RateFit>,
    pub log_corrected: bool,
    pub expected_slope: Option<f64>,
    pub ahom: Option<f64>,
}

impl RateSeries {
    pub fn new(quantity: &str, dim: usize, points: Vec<RatePoint>, log_corrected: bool, fit: bool) -> Result<Self> {
        for w in points.windows(2) {
            if w[1].side <= w[0].side {
                return Err(Error::InvalidArgument("sides must be strictly increasing".into()));
            }
        }
        let sides: Vec<f64> = points.iter().map(|p| p.side as f64).collect();
        let values: Vec<f64> = points.iter().map(|p| p.value).collect();
        let (raw_fit, corrected) = if fit && points.len() >= 3 {
            let raw = fit_rate(&sides, &values)?;
            let corr = if log_corrected {
                let v: Vec<f64> = values.iter().zip(&sides).map(|(v, n)| v / n.ln()).collect();
                fit_rate(&sides, &v)?
            } else {
                raw
            };
            (Some(raw), Some(corr))
        } else {
            (None, None)
        };
        Ok(RateSeries {
            quantity: quantity.to_string(),
            dim,
            points,
            raw_fit,
            fit: corrected,
            log_corrected,
            expected_slope: None,
            ahom: None,
        })
    }

    pub const CSV_HEADER: [&'static str; 5] = ["quantity", "N", "value", "stderr", "samples"];

    pub fn csv_records(&self) -> Vec<Vec<String>> {
        self.points
            .iter()
            .map(|p| {
                vec![
                    self.quantity.clone(),
                    p.side.to_string(),
                    format!("{:.12e}", p.value),
                    format!("{:.12e}", p.stderr),
                    p.samples.to_string(),
                ]
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    PseudoEigen,
    GffCovariance,
    BilapError,
    Discretization,
}

/// Where the effective coefficient used by an experiment comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AhomSource {
    Value(f64),
    /// Estimate at `side` (default: largest configured side) from `replicates` environments.
    Estimate { side: Option<usize>, replicates: usize },
}

impl Default for AhomSource {
    fn default() -> Self {
        AhomSource::Estimate {
            side: None,
            replicates: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub beta: f64,
    pub law: EnvironmentLaw,
    pub sides: Vec<usize>,
    pub modes: Vec<FourierIndex>,
    /// Environments for the pseudo-eigenfunction rate; noise samples per environment otherwise.
    pub replicates: usize,
    pub environments: usize,
    pub seed: u64,
    pub ahom: AhomSource,
    pub solver: SolverOptions,
    pub krylov: KrylovOptions,
    pub backend: GffBackend,
    pub eigenvalues: EigenvalueKind,
    /// Tail sums include all `k` with `|k|_inf <= cutoff_factor * N_max`.
    pub cutoff_factor: usize,
    /// Side at which the Monte-Carlo bi-Laplacian estimator is cross-checked.
    pub mc_side: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dim: 2,
            beta: 0.75,
            law: EnvironmentLaw::bernoulli(0.5, 1.0, 2.0),
            sides: vec![16, 32, 64, 128],
            modes: vec![FourierIndex::from([1, 0])],
            replicates: 64,
            environments: 8,
            seed: 0,
            ahom: AhomSource::default(),
            solver: SolverOptions::default(),
            krylov: KrylovOptions::default(),
            backend: GffBackend::Krylov,
            eigenvalues: EigenvalueKind::Continuum,
            cutoff_factor: 2,
            mc_side: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self, kind: ExperimentKind) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.dim == 0 {
            return cfg("dimension must be at least 1".into());
        }
        if self.sides.is_empty() || self.sides.iter().any(|&n| n < 2) {
            return cfg(format!("sides must be non-empty and each at least 2, got {:?}", self.sides));
        }
        if self.sides.windows(2).any(|w| w[1] <= w[0]) {
            return cfg(format!("sides must be strictly increasing, got {:?}", self.sides));
        }
        let needs_fit = matches!(
            kind,
            ExperimentKind::PseudoEigen | ExperimentKind::BilapError | ExperimentKind::Discretization
        );
        if needs_fit && self.sides.len() < 3 {
            return cfg("rate experiments need at least 3 sides".into());
        }
        let d = self.dim as f64;
        match kind {
            ExperimentKind::GffCovariance if self.beta <= d / 4.0 => {
                return cfg(format!("free-field experiments need beta > d/4 = {}, got {}", d / 4.0, self.beta));
            }
            ExperimentKind::BilapError if self.beta <= d / 4.0 - 0.5 => {
                return cfg(format!(
                    "bi-Laplacian experiments need beta > d/4 - 1/2 = {}, got {}",
                    d / 4.0 - 0.5,
                    self.beta
                ));
            }
            ExperimentKind::Discretization if self.beta <= d / 4.0 - 1.0 => {
                return cfg(format!(
                    "discretization experiment needs beta > d/4 - 1 = {}, got {}",
                    d / 4.0 - 1.0,
                    self.beta
                ));
            }
            _ => {}
        }
        self.law
            .validate(true)
            .map_err(|e| Error::Config(e.to_string()))?;
        if matches!(kind, ExperimentKind::PseudoEigen | ExperimentKind::GffCovariance) {
            if self.modes.is_empty() {
                return cfg("mode set is empty".into());
            }
            let smallest = TorusGrid::new(self.sides[0], self.dim)?;
            for k in &self.modes {
                if k.dim() != self.dim || k.is_zero() || !k.in_window(&smallest) {
                    return cfg(format!("mode {:?} must be non-zero and inside the window of N = {}", k.0, self.sides[0]));
                }
            }
        }
        if kind == ExperimentKind::GffCovariance && self.replicates < 100 {
            return cfg(format!("covariance estimates need at least 100 samples, got {}", self.replicates));
        }
        if matches!(kind, ExperimentKind::GffCovariance | ExperimentKind::BilapError) && self.environments == 0 {
            return cfg("need at least one environment".into());
        }
        if kind == ExperimentKind::PseudoEigen && self.replicates == 0 {
            return cfg("need at least one environment".into());
        }
        if let Some(s) = self.mc_side {
            if !self.sides.contains(&s) {
                return cfg(format!("mc_side {s} is not one of the configured sides"));
            }
        }
        if self.cutoff_factor == 0 {
            return cfg("cutoff_factor must be positive".into());
        }
        if let AhomSource::Value(v) = self.ahom {
            if !(v > 0.0 && v.is_finite()) {
                return cfg(format!("effective coefficient override must be positive, got {v}"));
            }
        }
        Ok(())
    }

    fn largest(&self) -> usize {
        *self.sides.last().expect("validated non-empty")
    }

    fn grid(&self, side: usize) -> Result<TorusGrid> {
        TorusGrid::new(side, self.dim)
    }

    /// Environment `index` of experiment `id`, sampled on the largest grid and projected to `side`.
    pub fn environment(&self, id: u64, index: usize, side: usize) -> Result<Conductances> {
        let seed = Seed(self.seed).derive_path(&[id, ids::ENVIRONMENT, index as u64]);
        let ambient = sample_environment(&self.law, &self.grid(self.largest())?, seed)?;
        if side == self.largest() {
            Ok(ambient)
        } else {
            ambient.project(side)
        }
    }

    fn noise_seed(&self, id: u64, side: usize, env: usize, sample: usize) -> Seed {
        Seed(self.seed).derive_path(&[id, ids::NOISE, side as u64, env as u64, sample as u64])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AhomUsed {
    pub value: f64,
    pub stderr: f64,
    /// Side of the estimate; `None` for overrides.
    pub side: Option<usize>,
    pub replicates: usize,
}

pub fn resolve_ahom(cfg: &ExperimentConfig) -> Result<AhomUsed> {
    if let EnvironmentLaw::Constant { value } = cfg.law {
        return Ok(AhomUsed {
            value,
            stderr: 0.0,
            side: None,
            replicates: 0,
        });
    }
    match &cfg.ahom {
        AhomSource::Value(v) => Ok(AhomUsed {
            value: *v,
            stderr: 0.0,
            side: None,
            replicates: 0,
        }),
        AhomSource::Estimate { side, replicates } => {
            let side = side.unwrap_or(cfg.largest());
            let est = estimate_ahom(
                &cfg.law,
                &cfg.grid(side)?,
                *replicates,
                Seed(cfg.seed).derive(ids::AHOM),
                &cfg.solver,
            )?;
            Ok(AhomUsed {
                value: est.mean,
                stderr: est.stderr,
                side: Some(side),
                replicates: *replicates,
            })
        }
    }
}

/// `(1/N^d) sum_x |phi^N_k - phi_k|^2` for one environment.
pub fn pseudo_eigen_distance(a: &Conductances, ahom: f64, k: &FourierIndex, opts: &SolverOptions) -> Result<f64> {
    let u = pseudo_eigenfunction(a, ahom, k, opts)?;
    let phi = fourier_mode(a.grid(), k)?;
    Ok(u.sub(&phi)?.norm_sq())
}

fn summarize(side: usize, xs: &[f64]) -> RatePoint {
    let (value, stderr) = mean_stderr(xs);
    RatePoint {
        side,
        value,
        stderr: if xs.len() < 2 { 0.0 } else { stderr },
        samples: xs.len(),
    }
}

/// Rate of `E |phi^N_k - phi_k|^2` for the first configured mode.
pub fn pseudo_eigen_rate(cfg: &ExperimentConfig) -> Result<RateSeries> {
    cfg.validate(ExperimentKind::PseudoEigen)?;
    let ahom = resolve_ahom(cfg)?;
    pseudo_eigen_rate_with(cfg, ahom.value, &cfg.modes[0])
}

/// As [`pseudo_eigen_rate`] with a given effective coefficient and mode.
pub fn pseudo_eigen_rate_with(cfg: &ExperimentConfig, ahom: f64, k: &FourierIndex) -> Result<RateSeries> {
    cfg.validate(ExperimentKind::PseudoEigen)?;
    let mut points = Vec::new();
    for &side in &cfg.sides {
        let values: Vec<f64> = (0..cfg.replicates)
            .into_par_iter()
            .map(|r| {
                let a = cfg.environment(ids::PSEUDO_EIGEN, r, side)?;
                pseudo_eigen_distance(&a, ahom, k, &cfg.solver)
            })
            .collect::<Result<_>>()?;
        points.push(summarize(side, &values));
    }
    let mut s = RateSeries::new(
        &format!("pseudo_eigen_l2sq_k{:?}", k.0),
        cfg.dim,
        points,
        cfg.dim == 2,
        !cfg.law.is_constant(),
    )?;
    s.expected_slope = Some(-2.0);
    s.ahom = Some(ahom);
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceLevel {
    pub side: usize,
    pub environments: usize,
    pub samples_per_environment: usize,
    pub cov_re: Vec<Vec<f64>>,
    pub cov_im: Vec<Vec<f64>>,
    pub stderr_re: Vec<Vec<f64>>,
    pub stderr_im: Vec<Vec<f64>>,
    /// Mean over environments of the squared off-diagonal Frobenius norm of the conditional covariance.
    pub offdiag_mass: f64,
    /// Largest `|entry| / stderr` over off-diagonal real and imaginary parts.
    pub max_offdiag_z: f64,
    /// Fitted `c` in `C_kk = c / lambda_k`.
    pub diag_constant: f64,
    /// Largest `|C_kk - c / lambda_k| / stderr`.
    pub max_diag_z: f64,
    /// `c_g^2 / ahom`, the constant the limit predicts.
    pub predicted_constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub modes: Vec<FourierIndex>,
    pub ahom: f64,
    pub levels: Vec<CovarianceLevel>,
}

/// Formal-field coefficients `<Xi, phi_k>` of free-field samples for a fixed mode set.
///
/// Uses `(A^{+1/2} w, phi_k) = (w, A^{+1/2} phi_k)`: the root is applied once
/// per mode and every sample then costs one inner product per mode. The
/// result is the same random vector as sampling the whole field with the
/// chosen backend and transforming it.
pub struct ModeProbe {
    /// Per mode: `A^{+1/2} cos_k` and `A^{+1/2} sin_k`.
    vectors: Vec<[Vec<f64>; 2]>,
    scale: f64,
}

impl ModeProbe {
    pub fn new(sampler: &GffSampler<'_>, modes: &[FourierIndex]) -> Result<Self> {
        let grid = *sampler.grid();
        let vectors = modes
            .iter()
            .map(|k| {
                let phi = fourier_mode(&grid, k)?;
                let (c, _) = sampler.apply_root(phi.re().values())?;
                let (s, _) = sampler.apply_root(phi.im().values())?;
                Ok([c, s])
            })
            .collect::<Result<_>>()?;
        let n = grid.len() as f64;
        Ok(ModeProbe {
            vectors,
            scale: FieldKind::GffEnv.formal_constant(grid.dim()) / n.sqrt(),
        })
    }

    pub fn coefficients(&self, noise: &LatticeField<f64>) -> Vec<Complex64> {
        let w = noise.values();
        self.vectors
            .iter()
            .map(|[c, s]| {
                let re: f64 = c.iter().zip(w).map(|(a, b)| a * b).sum();
                let im: f64 = s.iter().zip(w).map(|(a, b)| a * b).sum();
                Complex64::new(re, -im) * self.scale
            })
            .collect()
    }
}

/// Empirical covariance of free-field formal coefficients, per side.
pub fn gff_covariance_limit(cfg: &ExperimentConfig) -> Result<CovarianceReport> {
    cfg.validate(ExperimentKind::GffCovariance)?;
    let ahom = resolve_ahom(cfg)?.value;
    let m = cfg.modes.len();
    let mut levels = Vec::new();
    for &side in &cfg.sides {
        let grid = cfg.grid(side)?;
        // per environment: conditional covariance matrix and per-entry sample variances
        let per_env: Vec<(Vec<Vec<Complex64>>, Vec<Vec<[f64; 2]>>)> = (0..cfg.environments)
            .into_par_iter()
            .map(|e| {
                let a = cfg.environment(ids::GFF_COVARIANCE, e, side)?;
                let backend = if cfg.backend == GffBackend::Spectral && !a.is_constant() {
                    GffBackend::Krylov
                } else {
                    cfg.backend
                };
                let sampler = GffSampler::with_options(Medium::Environment(&a), backend, cfg.krylov)?;
                let probe = ModeProbe::new(&sampler, &cfg.modes)?;
                let mut sum = vec![vec![Complex64::default(); m]; m];
                let mut sumsq = vec![vec![[0.0; 2]; m]; m];
                for s in 0..cfg.replicates {
                    let w = sample_noise(&grid, cfg.noise_seed(ids::GFF_COVARIANCE, side, e, s));
                    let z = probe.coefficients(&w);
                    for i in 0..m {
                        for j in 0..m {
                            let p = z[i] * z[j].conj();
                            sum[i][j] += p;
                            sumsq[i][j][0] += p.re * p.re;
                            sumsq[i][j][1] += p.im * p.im;
                        }
                    }
                }
                let r = cfg.replicates as f64;
                let cov: Vec<Vec<Complex64>> = sum.iter().map(|row| row.iter().map(|v| v / r).collect()).collect();
                let var = (0..m)
                    .map(|i| {
                        (0..m)
                            .map(|j| {
                                let c = cov[i][j];
                                [
                                    (sumsq[i][j][0] / r - c.re * c.re) * r / (r - 1.0),
                                    (sumsq[i][j][1] / r - c.im * c.im) * r / (r - 1.0),
                                ]
                            })
                            .collect()
                    })
                    .collect();
                Ok((cov, var))
            })
            .collect::<Result<_>>()?;
        levels.push(summarize_covariance(side, cfg, &per_env, ahom));
    }
    Ok(CovarianceReport {
        modes: cfg.modes.clone(),
        ahom,
        levels,
    })
}

fn summarize_covariance(
    side: usize,
    cfg: &ExperimentConfig,
    per_env: &[(Vec<Vec<Complex64>>, Vec<Vec<[f64; 2]>>)],
    ahom: f64,
) -> CovarianceLevel {
    let m = cfg.modes.len();
    let e = per_env.len() as f64;
    let r = cfg.replicates as f64;
    let mut cov_re = vec![vec![0.0; m]; m];
    let mut cov_im = vec![vec![0.0; m]; m];
    let mut se_re = vec![vec![0.0; m]; m];
    let mut se_im = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            let re: Vec<f64> = per_env.iter().map(|(c, _)| c[i][j].re).collect();
            let im: Vec<f64> = per_env.iter().map(|(c, _)| c[i][j].im).collect();
            let (mr, sr) = mean_stderr(&re);
            let (mi, si) = mean_stderr(&im);
            cov_re[i][j] = mr;
            cov_im[i][j] = mi;
            if per_env.len() >= 2 {
                se_re[i][j] = sr;
                se_im[i][j] = si;
            } else {
                // one environment: sampling error of the mean of products
                se_re[i][j] = (per_env[0].1[i][j][0] / r).sqrt();
                se_im[i][j] = (per_env[0].1[i][j][1] / r).sqrt();
            }
        }
    }
    let offdiag_mass = per_env
        .iter()
        .map(|(c, _)| {
            let mut s = 0.0;
            for i in 0..m {
                for j in 0..m {
                    if i != j {
                        s += c[i][j].norm_sqr();
                    }
                }
            }
            s
        })
        .sum::<f64>()
        / e;
    let mut max_offdiag_z: f64 = 0.0;
    for i in 0..m {
        for j in 0..m {
            if i != j {
                max_offdiag_z = max_offdiag_z.max(z_score(cov_re[i][j], se_re[i][j]));
                max_offdiag_z = max_offdiag_z.max(z_score(cov_im[i][j], se_im[i][j]));
            }
        }
    }
    let lam: Vec<f64> = cfg.modes.iter().map(eigenvalue_continuum).collect();
    // weighted least squares for C_kk = c / lambda_k
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..m {
        let w = 1.0 / se_re[i][i].max(f64::MIN_POSITIVE).powi(2);
        num += w * cov_re[i][i] / lam[i];
        den += w / (lam[i] * lam[i]);
    }
    let c = num / den;
    let max_diag_z = (0..m)
        .map(|i| z_score(cov_re[i][i] - c / lam[i], se_re[i][i]))
        .fold(0.0, f64::max);
    let cg = FieldKind::GffEnv.formal_constant(cfg.dim);
    CovarianceLevel {
        side,
        environments: per_env.len(),
        samples_per_environment: cfg.replicates,
        cov_re,
        cov_im,
        stderr_re: se_re,
        stderr_im: se_im,
        offdiag_mass,
        max_offdiag_z,
        diag_constant: c,
        max_diag_z,
        predicted_constant: cg * cg / ahom,
    }
}

fn z_score(value: f64, se: f64) -> f64 {
    if se > 0.0 {
        value.abs() / se
    } else if value == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// One representative of every pair `{k, -k}` of non-zero window indices, with multiplicity.
pub fn half_spectrum(grid: &TorusGrid) -> Vec<(FourierIndex, f64)> {
    let n = grid.side() as i64;
    grid.fourier_indices()
        .filter(|k| !k.is_zero())
        .filter_map(|k| {
            let neg = FourierIndex(k.as_slice().iter().map(|&c| grid.wrap(-c)).collect());
            match k.cmp(&neg) {
                std::cmp::Ordering::Equal => Some((k, 1.0)),
                std::cmp::Ordering::Greater => Some((k, 2.0)),
                std::cmp::Ordering::Less => None,
            }
        })
        .inspect(|(k, _)| debug_assert!(k.as_slice().iter().all(|c| c.abs() <= n / 2)))
        .collect()
}

/// Exact noise average of `|Xi^{b,a}_{D,N} - Xi^b_{D,N} / ahom|^2_{H^{-beta}}` for one environment:
/// `c_b^2 sum_{k != 0} |phi^N_k - phi_k|^2 / (ahom lambda_k^(N))^2 lambda_k^{-2 beta}`.
pub fn bilap_error_exact(
    a: &Conductances,
    ahom: f64,
    beta: f64,
    kind: EigenvalueKind,
    opts: &SolverOptions,
) -> Result<f64> {
    let grid = *a.grid();
    let cb = FieldKind::BilapEnv.formal_constant(grid.dim());
    let terms: Vec<f64> = half_spectrum(&grid)
        .into_par_iter()
        .map(|(k, mult)| {
            let dist = pseudo_eigen_distance(a, ahom, &k, opts)?;
            let ln = ahom * eigenvalue_discrete(grid.side(), &k);
            Ok(mult * dist / (ln * ln) * kind.eval(grid.side(), &k).powf(-2.0 * beta))
        })
        .collect::<Result<_>>()?;
    Ok(cb * cb * terms.iter().sum::<f64>())
}

/// Squared `H^{-beta}` norm of the formal error field for one shared noise.
pub fn bilap_error_sample(
    a: &Conductances,
    ahom: f64,
    noise: &LatticeField<f64>,
    beta: f64,
    kind: EigenvalueKind,
    opts: &SolverOptions,
) -> Result<f64> {
    let het = sample_bilaplacian(Medium::Environment(a), noise, opts)?;
    let hom = sample_bilaplacian(Medium::Homogeneous(*a.grid()), noise, opts)?;
    let err = het.field.sub(&hom.field.scaled(1.0 / ahom))?;
    let spec = formal_field(&FieldSample::new(FieldKind::BilapEnv, err));
    Ok(sobolev_norm_with(&spec, -beta, kind).powi(2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorCheck {
    pub side: usize,
    pub environments: usize,
    pub noises: usize,
    pub exact_mean: f64,
    pub exact_stderr: f64,
    pub mc_mean: f64,
    pub mc_stderr: f64,
    /// `|mc - exact| / sqrt(se_mc^2 + se_exact^2)`.
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BilapReport {
    pub series: RateSeries,
    pub check: Option<EstimatorCheck>,
}

/// Exact-in-noise bi-Laplacian error at every side, with a Monte-Carlo cross-check at `mc_side`.
pub fn bilap_error_rate(cfg: &ExperimentConfig) -> Result<BilapReport> {
    cfg.validate(ExperimentKind::BilapError)?;
    let ahom = resolve_ahom(cfg)?.value;
    bilap_error_rate_with(cfg, ahom)
}

pub fn bilap_error_rate_with(cfg: &ExperimentConfig, ahom: f64) -> Result<BilapReport> {
    cfg.validate(ExperimentKind::BilapError)?;
    let mut points = Vec::new();
    let mut check = None;
    for &side in &cfg.sides {
        let envs: Vec<Conductances> = (0..cfg.environments)
            .map(|e| cfg.environment(ids::BILAP_ERROR, e, side))
            .collect::<Result<_>>()?;
        let exact: Vec<f64> = envs
            .iter()
            .map(|a| bilap_error_exact(a, ahom, cfg.beta, cfg.eigenvalues, &cfg.solver))
            .collect::<Result<_>>()?;
        let point = summarize(side, &exact);
        if cfg.mc_side == Some(side) {
            let mc: Vec<f64> = envs
                .par_iter()
                .enumerate()
                .map(|(e, a)| {
                    let vals: Vec<f64> = (0..cfg.replicates)
                        .map(|s| {
                            let w = sample_noise(a.grid(), cfg.noise_seed(ids::BILAP_ERROR, side, e, s));
                            bilap_error_sample(a, ahom, &w, cfg.beta, cfg.eigenvalues, &cfg.solver)
                        })
                        .collect::<Result<_>>()?;
                    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
                })
                .collect::<Result<_>>()?;
            let (mc_mean, mc_stderr) = mean_stderr(&mc);
            let combined = (mc_stderr.powi(2) + point.stderr.powi(2)).sqrt();
            check = Some(EstimatorCheck {
                side,
                environments: envs.len(),
                noises: cfg.replicates,
                exact_mean: point.value,
                exact_stderr: point.stderr,
                mc_mean,
                mc_stderr,
                z: z_score(mc_mean - point.value, combined),
            });
        }
        points.push(point);
    }
    let mut series = RateSeries::new(
        &format!("bilap_error_hm{}", cfg.beta),
        cfg.dim,
        points,
        cfg.dim == 2,
        !cfg.law.is_constant(),
    )?;
    series.expected_slope = Some(-2.0);
    series.ahom = Some(ahom);
    Ok(BilapReport { series, check })
}

/// `prod_i sinc(pi k_i / N)`: the block average of `phi_k` over a cell of side `1/N`, relative to its centre value.
pub fn block_factor(side: usize, k: &FourierIndex) -> f64 {
    k.as_slice()
        .iter()
        .map(|&c| {
            let t = PI * c as f64 / side as f64;
            if t == 0.0 {
                1.0
            } else {
                t.sin() / t
            }
        })
        .product()
}

/// `(phi_k, 1_{B_N(y)})_{L^2}` for the cell `B_N(y) = y + [-1/2N, 1/2N]^d` centred at site `y`.
pub fn block_inner_product(grid: &TorusGrid, k: &FourierIndex, site: usize) -> Complex64 {
    let phase: f64 = k
        .as_slice()
        .iter()
        .zip(grid.point(site))
        .map(|(&c, x)| 2.0 * PI * c as f64 * x)
        .sum();
    Complex64::from_polar(1.0, phase) * (block_factor(grid.side(), k) / grid.len() as f64)
}

/// Second moment of the coupled per-mode error for a window mode:
/// `1/lambda_N^2 - 2 S_k / (lambda_N lambda) + 1/lambda^2`.
pub fn discretization_mode_moment(side: usize, k: &FourierIndex) -> f64 {
    let ln = eigenvalue_discrete(side, k);
    let l = eigenvalue_continuum(k);
    1.0 / (ln * ln) - 2.0 * block_factor(side, k) / (ln * l) + 1.0 / (l * l)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationValue {
    pub side: usize,
    pub value: f64,
    /// Upper bound on the neglected tail beyond the cutoff.
    pub remainder: f64,
    pub cutoff: usize,
}

/// `E |Xi^b_{D,N} - Xi^b_D|^2_{H^{-beta}}` under the block coupling, in closed form.
///
/// Modes outside the window contribute `lambda_k^{-2 beta - 2}`. The sum runs
/// over `|k|_inf <= cutoff`; the rest is bounded by comparing each term with
/// the radial integral over its unit cell, shifted by the half-diagonal.
pub fn discretization_error(dim: usize, side: usize, beta: f64, cutoff: usize) -> Result<DiscretizationValue> {
    let grid = TorusGrid::new(side, dim)?;
    let p = 2.0 * beta + 2.0;
    if 2.0 * p <= dim as f64 {
        return Err(Error::InvalidArgument(format!("tail diverges for beta = {beta} in dimension {dim}")));
    }
    if cutoff < side {
        return Err(Error::InvalidArgument(format!("cutoff {cutoff} below the window half-width")));
    }
    let big = TorusGrid::new(2 * cutoff + 1, dim)?;
    let c = cutoff as i64;
    let terms: Vec<f64> = (0..big.len())
        .into_par_iter()
        .map(|s| {
            let k = FourierIndex(big.coords(s).into_iter().collect());
            debug_assert!(k.as_slice().iter().all(|v| v.abs() <= c));
            if k.is_zero() {
                return 0.0;
            }
            let l = eigenvalue_continuum(&k);
            if k.in_window(&grid) {
                discretization_mode_moment(side, &k) * l.powf(-2.0 * beta)
            } else {
                l.powf(-p)
            }
        })
        .collect();
    let value: f64 = terms.iter().sum();
    let remainder = tail_bound(dim, p, cutoff as f64 + 0.5);
    Ok(DiscretizationValue {
        side,
        value,
        remainder,
        cutoff,
    })
}

/// Upper bound for `sum_{|k|_inf >= r} (4 pi^2 |k|^2)^{-p}` via
/// `omega_d (4 pi^2)^{-p} int_r^inf s^{d-1} (s - h)^{-2p} ds`, `h = sqrt(d)/2`.
fn tail_bound(dim: usize, p: f64, r: f64) -> f64 {
    let d = dim as f64;
    let h = d.sqrt() / 2.0;
    let t = r - h;
    let omega = 2.0 * PI.powf(d / 2.0) / statrs::function::gamma::gamma(d / 2.0);
    // expand (t + h)^{d-1} binomially and integrate each power of t
    let mut integral = 0.0;
    let mut binom = 1.0;
    for j in 0..dim {
        let e = j as f64 - 2.0 * p + 1.0;
        integral += binom * h.powi((dim - 1 - j) as i32) * t.powf(e) / (-e);
        binom = binom * (dim - 1 - j) as f64 / (j + 1) as f64;
    }
    omega * (4.0 * PI * PI).powf(-p) * integral
}

/// Closed-form discretization error at every configured side and its fitted slope.
pub fn discretization_rate(cfg: &ExperimentConfig) -> Result<RateSeries> {
    cfg.validate(ExperimentKind::Discretization)?;
    let cutoff = cfg.cutoff_factor * cfg.largest();
    let mut points = Vec::new();
    for &side in &cfg.sides {
        let v = discretization_error(cfg.dim, side, cfg.beta, cutoff)?;
        if v.remainder > 0.1 * v.value {
            return Err(Error::Assertion(format!(
                "cutoff {cutoff} too small at N = {side}: remainder bound {:e} exceeds 10% of {:e}",
                v.remainder, v.value
            )));
        }
        points.push(RatePoint {
            side,
            value: v.value,
            stderr: v.remainder,
            samples: 0,
        });
    }
    let mut s = RateSeries::new(&format!("discretization_hm{}", cfg.beta), cfg.dim, points, false, true)?;
    s.expected_slope = Some(cfg.dim as f64 - 4.0 - 4.0 * cfg.beta);
    Ok(s)
}
