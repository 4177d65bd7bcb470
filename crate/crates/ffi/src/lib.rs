//! C interface to `hfield`.
//!
//! Objects are opaque heap handles created by `hf_*_new`/`hf_*_sample`/
//! `hf_*_read` functions and released with the matching `hf_*_free`.
//! Every fallible function returns an [`HfStatus`]; on failure a message is
//! available from [`hf_last_error`] on the same thread. Output pointers are
//! written only on success. Panics are caught at the boundary and reported
//! as [`HfStatus::Panic`].
//!
//! Arrays are passed as pointer plus length. Field arrays hold one value per
//! site in row-major order over the window `[-floor(N/2), ceil(N/2))^d`,
//! last axis fastest. Environment arrays hold `d * N^d` edge weights,
//! axis-major: entry `axis * N^d + site` is the weight of the edge from
//! `site` in the positive `axis` direction.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hfield::environment::{sample_environment_with, Conductances, EnvironmentLaw};
use hfield::homogenization::estimate_ahom;
use hfield::sampler::{sample_bilaplacian, sample_noise, FieldKind, FieldSample, GffBackend, GffSampler};
use hfield::solver::{solve_heterogeneous, solve_homogeneous, Medium, SolverOptions};
use hfield::{Error, LatticeField, Seed, TorusGrid};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidGrid = 3,
    ShapeMismatch = 4,
    InvalidLaw = 5,
    Ellipticity = 6,
    NotMeanZero = 7,
    NotConverged = 8,
    Format = 9,
    Io = 10,
    Config = 11,
    Assertion = 12,
    Panic = 13,
}

/// Which field to sample.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HfFieldKind {
    GffHom = 0,
    GffEnv = 1,
    BilapHom = 2,
    BilapEnv = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HfBackend {
    Spectral = 0,
    Dense = 1,
    Krylov = 2,
}

/// Convergence data of one iterative solve.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct HfSolveInfo {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Opaque environment handle.
pub struct HfEnvironment {
    inner: Conductances,
}

/// Opaque sampled-field handle.
pub struct HfField {
    inner: FieldSample,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> HfStatus {
    match e {
        Error::InvalidGrid(_) => HfStatus::InvalidGrid,
        Error::IndexOutOfRange { .. } | Error::InvalidArgument(_) => HfStatus::InvalidArgument,
        Error::ShapeMismatch(_) => HfStatus::ShapeMismatch,
        Error::InvalidLaw(_) => HfStatus::InvalidLaw,
        Error::Ellipticity { .. } => HfStatus::Ellipticity,
        Error::NotMeanZero { .. } => HfStatus::NotMeanZero,
        Error::NotConverged(_) => HfStatus::NotConverged,
        Error::Format(_) => HfStatus::Format,
        Error::Io(_) => HfStatus::Io,
        Error::Config(_) => HfStatus::Config,
        Error::Assertion(_) => HfStatus::Assertion,
    }
}

struct Fail(HfStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(HfStatus::NullPointer, format!("{what} is null"))
}

fn guard(body: impl FnOnce() -> Result<(), Fail>) -> HfStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => HfStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("panic: {msg}"));
            HfStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(HfStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_out<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn env_ref<'a>(p: *const HfEnvironment) -> Result<&'a Conductances, Fail> {
    p.as_ref().map(|e| &e.inner).ok_or_else(|| null("environment"))
}

unsafe fn field_ref<'a>(p: *const HfField) -> Result<&'a FieldSample, Fail> {
    p.as_ref().map(|f| &f.inner).ok_or_else(|| null("field"))
}

fn check_len(len: usize, expected: usize, what: &str) -> Result<(), Fail> {
    if len != expected {
        return Err(Fail(
            HfStatus::ShapeMismatch,
            format!("{what} has length {len}, expected {expected}"),
        ));
    }
    Ok(())
}

fn solver_options(tol: f64) -> SolverOptions {
    if tol > 0.0 {
        SolverOptions::with_tol(tol)
    } else {
        SolverOptions::default()
    }
}

/// Message of the last failed call on this thread, or null. Valid until the next failing call on the thread.
#[no_mangle]
pub extern "C" fn hf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Samples i.i.d. edge weights from a law such as `"bernoulli(0.5,1,2)"`, `"uniform(1,2)"` or `"constant(1.5)"`.
///
/// # Safety
/// `law` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hf_environment_sample(
    law: *const c_char,
    dim: usize,
    side: usize,
    seed: u64,
    out: *mut *mut HfEnvironment,
) -> HfStatus {
    guard(|| {
        let law: EnvironmentLaw = str_arg(law, "law")?.parse()?;
        if out.is_null() {
            return Err(null("out"));
        }
        let grid = TorusGrid::new(side, dim)?;
        let inner = sample_environment_with(&law, &grid, Seed(seed), true)?;
        *out = Box::into_raw(Box::new(HfEnvironment { inner }));
        Ok(())
    })
}

/// Builds an environment from `dim * side^dim` axis-major weights in `[1, ellipticity]`.
///
/// # Safety
/// `values` must point to `len` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hf_environment_new(
    dim: usize,
    side: usize,
    values: *const f64,
    len: usize,
    ellipticity: f64,
    out: *mut *mut HfEnvironment,
) -> HfStatus {
    guard(|| {
        let v = slice_arg(values, len, "values")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let grid = TorusGrid::new(side, dim)?;
        let inner = Conductances::new(grid, v.to_vec(), ellipticity, true)?;
        *out = Box::into_raw(Box::new(HfEnvironment { inner }));
        Ok(())
    })
}

/// Releases an environment; null is ignored.
///
/// # Safety
/// `env` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hf_environment_free(env: *mut HfEnvironment) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Side length, or 0 for null.
///
/// # Safety
/// `env` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hf_environment_side(env: *const HfEnvironment) -> usize {
    env.as_ref().map_or(0, |e| e.inner.grid().side())
}

/// Dimension, or 0 for null.
///
/// # Safety
/// `env` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hf_environment_dim(env: *const HfEnvironment) -> usize {
    env.as_ref().map_or(0, |e| e.inner.grid().dim())
}

/// Copies the `dim * side^dim` edge weights into `out`.
///
/// # Safety
/// `env` must be a live handle and `out` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hf_environment_values(env: *const HfEnvironment, out: *mut f64, len: usize) -> HfStatus {
    guard(|| {
        let a = env_ref(env)?;
        check_len(len, a.values().len(), "output")?;
        slice_out(out, len, "out")?.copy_from_slice(a.values());
        Ok(())
    })
}

/// `out = -div(a grad f)` with the `N^2`-scaled operator.
///
/// # Safety
/// `f` and `out` must each hold `len = side^dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn hf_environment_apply(
    env: *const HfEnvironment,
    f: *const f64,
    out: *mut f64,
    len: usize,
) -> HfStatus {
    guard(|| {
        let a = env_ref(env)?;
        check_len(len, a.grid().len(), "field")?;
        let f = slice_arg(f, len, "f")?;
        let o = slice_out(out, len, "out")?;
        a.apply_into(f, o);
        Ok(())
    })
}

/// Writes an `HFENV1` dump.
///
/// # Safety
/// `env` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn hf_environment_write(env: *const HfEnvironment, path: *const c_char) -> HfStatus {
    guard(|| {
        let a = env_ref(env)?;
        let file = File::create(str_arg(path, "path")?).map_err(Error::from)?;
        a.write_to(BufWriter::new(file))?;
        Ok(())
    })
}

/// Reads an `HFENV1` dump.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hf_environment_read(path: *const c_char, out: *mut *mut HfEnvironment) -> HfStatus {
    guard(|| {
        let file = File::open(str_arg(path, "path")?).map_err(Error::from)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = Conductances::read_from(BufReader::new(file))?;
        *out = Box::into_raw(Box::new(HfEnvironment { inner }));
        Ok(())
    })
}

/// Solves `-div(a grad u) = rhs` for the mean-zero `u` by conjugate gradients.
///
/// `rhs` must be mean-zero. `tol <= 0` selects the default tolerance.
/// `info` may be null.
///
/// # Safety
/// `rhs` and `out` must each hold `len = side^dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn hf_solve(
    env: *const HfEnvironment,
    rhs: *const f64,
    out: *mut f64,
    len: usize,
    tol: f64,
    info: *mut HfSolveInfo,
) -> HfStatus {
    guard(|| {
        let a = env_ref(env)?;
        check_len(len, a.grid().len(), "rhs")?;
        let b = LatticeField::new(*a.grid(), slice_arg(rhs, len, "rhs")?.to_vec())?;
        let (u, rep) = solve_heterogeneous(a, &b, &solver_options(tol))?;
        slice_out(out, len, "out")?.copy_from_slice(u.values());
        if let Some(i) = info.as_mut() {
            *i = HfSolveInfo {
                iterations: rep.iterations,
                relative_residual: rep.relative_residual,
            };
        }
        Ok(())
    })
}

/// Solves `-Delta_N u = rhs` spectrally.
///
/// # Safety
/// `rhs` and `out` must each hold `len = side^dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn hf_solve_homogeneous(
    dim: usize,
    side: usize,
    rhs: *const f64,
    out: *mut f64,
    len: usize,
) -> HfStatus {
    guard(|| {
        let grid = TorusGrid::new(side, dim)?;
        check_len(len, grid.len(), "rhs")?;
        let b = LatticeField::new(grid, slice_arg(rhs, len, "rhs")?.to_vec())?;
        let u = solve_homogeneous(&grid, &b)?;
        slice_out(out, len, "out")?.copy_from_slice(u.values());
        Ok(())
    })
}

/// Samples a field driven by the white noise of `noise_seed`.
///
/// Homogeneous kinds take `env = NULL` and use `dim`, `side`; environment
/// kinds take the grid of `env` and ignore `dim`, `side`. `backend` applies
/// to free fields only.
///
/// # Safety
/// `env` must be null or a live handle, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hf_field_sample(
    kind: HfFieldKind,
    env: *const HfEnvironment,
    dim: usize,
    side: usize,
    backend: HfBackend,
    noise_seed: u64,
    out: *mut *mut HfField,
) -> HfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let homogeneous = matches!(kind, HfFieldKind::GffHom | HfFieldKind::BilapHom);
        let hom_grid;
        let medium = if homogeneous {
            if !env.is_null() {
                return Err(Fail(
                    HfStatus::InvalidArgument,
                    "homogeneous kinds take a null environment".into(),
                ));
            }
            hom_grid = TorusGrid::new(side, dim)?;
            Medium::Homogeneous(hom_grid)
        } else {
            Medium::Environment(env_ref(env)?)
        };
        let backend = match backend {
            HfBackend::Spectral => GffBackend::Spectral,
            HfBackend::Dense => GffBackend::Dense,
            HfBackend::Krylov => GffBackend::Krylov,
        };
        let seed = Seed(noise_seed);
        let inner = match kind {
            HfFieldKind::GffHom | HfFieldKind::GffEnv => GffSampler::new(medium, backend)?.sample(seed)?,
            HfFieldKind::BilapHom | HfFieldKind::BilapEnv => {
                let w = sample_noise(medium.grid(), seed);
                let mut s = sample_bilaplacian(medium, &w, &SolverOptions::default())?;
                s.noise_seed = Some(noise_seed);
                s
            }
        };
        *out = Box::into_raw(Box::new(HfField { inner }));
        Ok(())
    })
}

/// Releases a field; null is ignored.
///
/// # Safety
/// `field` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hf_field_free(field: *mut HfField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Number of sites, or 0 for null.
///
/// # Safety
/// `field` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hf_field_len(field: *const HfField) -> usize {
    field.as_ref().map_or(0, |f| f.inner.field.len())
}

/// Kind of the field.
///
/// # Safety
/// `field` must be a live handle and `kind` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hf_field_kind(field: *const HfField, kind: *mut HfFieldKind) -> HfStatus {
    guard(|| {
        let f = field_ref(field)?;
        let k = kind.as_mut().ok_or_else(|| null("kind"))?;
        *k = match f.kind {
            FieldKind::GffHom => HfFieldKind::GffHom,
            FieldKind::GffEnv => HfFieldKind::GffEnv,
            FieldKind::BilapHom => HfFieldKind::BilapHom,
            FieldKind::BilapEnv => HfFieldKind::BilapEnv,
        };
        Ok(())
    })
}

/// Copies the site values into `out`.
///
/// # Safety
/// `field` must be a live handle and `out` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hf_field_values(field: *const HfField, out: *mut f64, len: usize) -> HfStatus {
    guard(|| {
        let f = field_ref(field)?;
        check_len(len, f.field.len(), "output")?;
        slice_out(out, len, "out")?.copy_from_slice(f.field.values());
        Ok(())
    })
}

/// Writes an `HFFLD1` dump.
///
/// # Safety
/// `field` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn hf_field_write(field: *const HfField, path: *const c_char) -> HfStatus {
    guard(|| {
        let f = field_ref(field)?;
        let file = File::create(str_arg(path, "path")?).map_err(Error::from)?;
        f.write_to(BufWriter::new(file))?;
        Ok(())
    })
}

/// Reads an `HFFLD1` dump.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hf_field_read(path: *const c_char, out: *mut *mut HfField) -> HfStatus {
    guard(|| {
        let file = File::open(str_arg(path, "path")?).map_err(Error::from)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = FieldSample::read_from(BufReader::new(file))?;
        *out = Box::into_raw(Box::new(HfField { inner }));
        Ok(())
    })
}

/// Monte-Carlo estimate of the effective coefficient from `replicates` environments.
///
/// # Safety
/// `law` must be a NUL-terminated string; `mean` and `stderr` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn hf_ahom_estimate(
    law: *const c_char,
    dim: usize,
    side: usize,
    replicates: usize,
    seed: u64,
    mean: *mut f64,
    stderr: *mut f64,
) -> HfStatus {
    guard(|| {
        let law: EnvironmentLaw = str_arg(law, "law")?.parse()?;
        if mean.is_null() || stderr.is_null() {
            return Err(null("mean or stderr"));
        }
        let grid = TorusGrid::new(side, dim)?;
        let est = estimate_ahom(&law, &grid, replicates, Seed(seed), &SolverOptions::default())?;
        *mean = est.mean;
        *stderr = est.stderr;
        Ok(())
    })
}
