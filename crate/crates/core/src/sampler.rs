//! White noise, Gaussian free fields and bi-Laplacian fields on the torus.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::environment::Conductances;
use crate::error::{Error, Result};
use crate::field::{LatticeField, SpectralField};
use crate::grid::TorusGrid;
use crate::krylov::{inverse_sqrt_apply, KrylovOptions};
use crate::seed::Seed;
use crate::solver::{dense, solve_heterogeneous, solve_homogeneous, Medium, SolveReport, SolverOptions};
use crate::spectral::{dft, discrete_eigenvalue_table, transform_in_place, Direction};

pub const FIELD_MAGIC: &[u8; 6] = b"HFFLD1";

/// Largest site count accepted by the dense backend.
pub const DENSE_SITE_LIMIT: usize = 20736;

/// I.i.d. standard normal values, one per site, drawn in site order.
pub fn sample_noise(grid: &TorusGrid, seed: Seed) -> LatticeField<f64> {
    let mut rng = seed.rng();
    LatticeField::from_fn(*grid, |_| rng.sample(StandardNormal))
}

/// Fine-level white noise from which every coarser level is built by block sums.
///
/// The coarse site with window coordinates `c` collects the fine sites with
/// coordinates in `[c r, c r + r)` (taken modulo `N_max`) on each axis, where
/// `r = N_max / N`, and is scaled by `r^{-d/2}`. Blocks nest across levels.
#[derive(Debug, Clone)]
pub struct NoiseHierarchy {
    finest: LatticeField<f64>,
}

impl NoiseHierarchy {
    pub fn new(finest: &TorusGrid, seed: Seed) -> Self {
        NoiseHierarchy {
            finest: sample_noise(finest, seed),
        }
    }

    pub fn from_field(finest: LatticeField<f64>) -> Self {
        NoiseHierarchy { finest }
    }

    pub fn finest(&self) -> &LatticeField<f64> {
        &self.finest
    }

    pub fn coarsen(&self, side: usize) -> Result<LatticeField<f64>> {
        coarsen_field(&self.finest, side)
    }
}

/// Block-sum coarsening `xi_N(x) = (N / N_f)^{d/2} sum_{block(x)} xi_{N_f}`.
pub fn coarsen_field(fine: &LatticeField<f64>, side: usize) -> Result<LatticeField<f64>> {
    let fg = *fine.grid();
    let nf = fg.side();
    if side == 0 || !nf.is_multiple_of(side) {
        return Err(Error::InvalidArgument(format!("{side} does not divide {nf}")));
    }
    let coarse = TorusGrid::new(side, fg.dim())?;
    let r = nf / side;
    let d = fg.dim();
    let scale = (r as f64).powf(-(d as f64) / 2.0);
    let block = r.pow(d as u32);
    let fv = fine.values();
    let mut offset = vec![0i64; d];
    let mut fc = vec![0i64; d];
    Ok(LatticeField::from_fn(coarse, |x| {
        let c = coarse.coords(x);
        let mut s = 0.0;
        for b in 0..block {
            let mut rest = b;
            for axis in (0..d).rev() {
                offset[axis] = (rest % r) as i64;
                rest /= r;
            }
            for axis in 0..d {
                fc[axis] = fg.wrap(c[axis] * r as i64 + offset[axis]);
            }
            s += fv[fg.site(&fc)];
        }
        s * scale
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    GffHom,
    GffEnv,
    BilapHom,
    BilapEnv,
}

impl FieldKind {
    pub fn tag(self) -> u64 {
        match self {
            FieldKind::GffHom => 0,
            FieldKind::GffEnv => 1,
            FieldKind::BilapHom => 2,
            FieldKind::BilapEnv => 3,
        }
    }

    pub fn from_tag(tag: u64) -> Result<Self> {
        Ok(match tag {
            0 => FieldKind::GffHom,
            1 => FieldKind::GffEnv,
            2 => FieldKind::BilapHom,
            3 => FieldKind::BilapEnv,
            other => return Err(Error::Format(format!("unknown field kind tag {other}"))),
        })
    }

    pub fn is_gff(self) -> bool {
        matches!(self, FieldKind::GffHom | FieldKind::GffEnv)
    }

    /// `c_g = (2d)^{-1/2}` for free fields, `c_b = (2d)^{-1}` for bi-Laplacian fields.
    pub fn formal_constant(self, dim: usize) -> f64 {
        let two_d = 2.0 * dim as f64;
        if self.is_gff() {
            two_d.powf(-0.5)
        } else {
            1.0 / two_d
        }
    }
}

#[derive(Debug, Clone)]
pub struct FieldSample {
    pub kind: FieldKind,
    pub field: LatticeField<f64>,
    /// Seed of the environment the field was built on, when known.
    pub environment_seed: Option<u64>,
    /// Seed of the driving noise, when known.
    pub noise_seed: Option<u64>,
    pub report: Option<SolveReport>,
}

impl FieldSample {
    pub fn new(kind: FieldKind, field: LatticeField<f64>) -> Self {
        FieldSample {
            kind,
            field,
            environment_seed: None,
            noise_seed: None,
            report: None,
        }
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let g = self.field.grid();
        w.write_all(FIELD_MAGIC)?;
        for v in [g.dim() as u64, g.side() as u64, self.kind.tag()] {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in self.field.values() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 6];
        r.read_exact(&mut magic)?;
        if &magic != FIELD_MAGIC {
            return Err(Error::Format("missing HFFLD1 magic".into()));
        }
        let mut word = [0u8; 8];
        let mut header = [0u64; 3];
        for h in header.iter_mut() {
            r.read_exact(&mut word)?;
            *h = u64::from_le_bytes(word);
        }
        let grid = TorusGrid::new(header[1] as usize, header[0] as usize)?;
        let kind = FieldKind::from_tag(header[2])?;
        let mut values = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            r.read_exact(&mut word)?;
            values.push(f64::from_le_bytes(word));
        }
        Ok(FieldSample::new(kind, LatticeField::new(grid, values)?))
    }
}

/// Coefficients `c_i N^{-d/2} sum_z Xi(z) conj(phi_k(z))` of the rescaled point-mass field.
pub fn formal_field(sample: &FieldSample) -> SpectralField {
    let g = sample.field.grid();
    let c = sample.kind.formal_constant(g.dim());
    dft(&sample.field).scaled(c * (g.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GffBackend {
    #[default]
    Spectral,
    Dense,
    Krylov,
}

impl std::str::FromStr for GffBackend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" => Ok(GffBackend::Spectral),
            "dense" => Ok(GffBackend::Dense),
            "krylov" => Ok(GffBackend::Krylov),
            other => Err(Error::Config(format!("unknown backend '{other}' (spectral, dense, krylov)"))),
        }
    }
}

/// Applies `A^{+1/2}` for a fixed medium; reusable across many samples.
pub struct GffSampler<'a> {
    medium: Medium<'a>,
    backend: GffBackend,
    krylov: KrylovOptions,
    root: Option<DMatrix<f64>>,
    spectral_scale: f64,
}

impl<'a> GffSampler<'a> {
    pub fn new(medium: Medium<'a>, backend: GffBackend) -> Result<Self> {
        Self::with_options(medium, backend, KrylovOptions::default())
    }

    pub fn with_options(medium: Medium<'a>, backend: GffBackend, krylov: KrylovOptions) -> Result<Self> {
        let n = medium.grid().len();
        let mut spectral_scale = 1.0;
        let mut root = None;
        match backend {
            GffBackend::Spectral => {
                if let Medium::Environment(a) = medium {
                    if !a.is_constant() {
                        return Err(Error::InvalidArgument(
                            "spectral backend needs a homogeneous or constant medium".into(),
                        ));
                    }
                    spectral_scale = 1.0 / a.values()[0].sqrt();
                }
            }
            GffBackend::Dense => {
                if n > DENSE_SITE_LIMIT {
                    return Err(Error::InvalidArgument(format!(
                        "dense backend limited to {DENSE_SITE_LIMIT} sites, grid has {n}"
                    )));
                }
                root = Some(dense::Spectrum::new(dense::operator_matrix(medium)).pseudo_inverse_sqrt());
            }
            GffBackend::Krylov => {}
        }
        Ok(GffSampler {
            medium,
            backend,
            krylov,
            root,
            spectral_scale,
        })
    }

    pub fn grid(&self) -> &TorusGrid {
        self.medium.grid()
    }

    pub fn kind(&self) -> FieldKind {
        match self.medium {
            Medium::Homogeneous(_) => FieldKind::GffHom,
            Medium::Environment(_) => FieldKind::GffEnv,
        }
    }

    /// `A^{+1/2} (v - mean(v))`.
    pub fn apply_root(&self, v: &[f64]) -> Result<(Vec<f64>, Option<SolveReport>)> {
        let grid = *self.grid();
        if v.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!("vector of length {} on {} sites", v.len(), grid.len())));
        }
        match self.backend {
            GffBackend::Spectral => {
                let lam = discrete_eigenvalue_table(&grid);
                let mut data: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
                transform_in_place(&grid, &mut data, Direction::Forward);
                for (c, l) in data.iter_mut().zip(&lam) {
                    *c = if *l > 0.0 {
                        *c * (self.spectral_scale / l.sqrt())
                    } else {
                        Complex64::default()
                    };
                }
                transform_in_place(&grid, &mut data, Direction::Inverse);
                Ok((data.into_iter().map(|c| c.re).collect(), None))
            }
            GffBackend::Dense => {
                let root = self.root.as_ref().expect("dense root is built at construction");
                let mut x = root * DVector::from_column_slice(v);
                let m = x.mean();
                x.add_scalar_mut(-m);
                Ok((x.as_slice().to_vec(), None))
            }
            GffBackend::Krylov => {
                let (x, rep) = match self.medium {
                    Medium::Environment(a) => inverse_sqrt_apply(|p, o| a.apply_into(p, o), v, &self.krylov)?,
                    Medium::Homogeneous(g) => {
                        let unit = Conductances::constant(g, 1.0)?;
                        inverse_sqrt_apply(|p, o| unit.apply_into(p, o), v, &self.krylov)?
                    }
                };
                Ok((x, Some(rep)))
            }
        }
    }

    /// Field driven by the white noise of `noise_seed`.
    pub fn sample(&self, noise_seed: Seed) -> Result<FieldSample> {
        let w = sample_noise(self.grid(), noise_seed);
        let mut s = self.sample_from_noise(&w)?;
        s.noise_seed = Some(noise_seed.0);
        Ok(s)
    }

    pub fn sample_from_noise(&self, noise: &LatticeField<f64>) -> Result<FieldSample> {
        if noise.grid() != self.grid() {
            return Err(Error::ShapeMismatch("noise on a different grid".into()));
        }
        let (x, report) = self.apply_root(noise.values())?;
        let mut s = FieldSample::new(self.kind(), LatticeField::new(*self.grid(), x)?.centered());
        s.report = report;
        Ok(s)
    }
}

/// One free-field sample with covariance `G^N` (homogeneous) or `G^{N,a}`.
pub fn sample_gff(medium: Medium<'_>, seed: Seed, backend: GffBackend) -> Result<FieldSample> {
    GffSampler::new(medium, backend)?.sample(seed)
}

/// Solves `-div(a grad Xi) = xi - mean(xi)` (or `-Delta_N Xi = ...`).
pub fn sample_bilaplacian(medium: Medium<'_>, noise: &LatticeField<f64>, opts: &SolverOptions) -> Result<FieldSample> {
    if noise.grid() != medium.grid() {
        return Err(Error::ShapeMismatch("noise on a different grid".into()));
    }
    let rhs = noise.clone().centered();
    let (field, kind, report) = match medium {
        Medium::Homogeneous(g) => (solve_homogeneous(&g, &rhs)?, FieldKind::BilapHom, None),
        Medium::Environment(a) => {
            let (u, rep) = solve_heterogeneous(a, &rhs, opts)?;
            (u, FieldKind::BilapEnv, Some(rep))
        }
    };
    let mut s = FieldSample::new(kind, field.centered());
    s.report = report;
    Ok(s)
}
