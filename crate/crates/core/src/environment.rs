//! Random conductance environments and the divergence-form operator.
//!
//! An environment assigns a weight to every nearest-neighbor edge of the
//! torus. The edge `{x, x + e_i}` is stored at its base site `x` (the wrapping
//! edge of the top row included), and weights are kept axis-major: all axis-0
//! edges in site order, then axis 1, and so on. That layout is also the
//! canonical edge order of the `HFENV1` dump format.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::LatticeField;
use crate::grid::TorusGrid;
use crate::seed::{tags, Seed};

pub const ENV_MAGIC: &[u8; 6] = b"HFENV1";

/// Product law of the edge weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvironmentLaw {
    Constant { value: f64 },
    Uniform { lo: f64, hi: f64 },
    /// Atom `a` with probability `1 - p`, atom `b` with probability `p`.
    Bernoulli { p: f64, a: f64, b: f64 },
}

impl EnvironmentLaw {
    pub fn constant(value: f64) -> Self {
        EnvironmentLaw::Constant { value }
    }

    pub fn uniform(lo: f64, hi: f64) -> Self {
        EnvironmentLaw::Uniform { lo, hi }
    }

    pub fn bernoulli(p: f64, a: f64, b: f64) -> Self {
        EnvironmentLaw::Bernoulli { p, a, b }
    }

    /// Ellipticity bound: the largest value the law can produce.
    pub fn ellipticity(&self) -> f64 {
        match *self {
            EnvironmentLaw::Constant { value } => value,
            EnvironmentLaw::Uniform { hi, .. } => hi,
            EnvironmentLaw::Bernoulli { a, b, .. } => a.max(b),
        }
    }

    /// Smallest and largest value the law can produce.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            EnvironmentLaw::Constant { value } => (value, value),
            EnvironmentLaw::Uniform { lo, hi } => (lo, hi),
            EnvironmentLaw::Bernoulli { a, b, .. } => (a.min(b), a.max(b)),
        }
    }

    pub fn is_constant(&self) -> bool {
        match *self {
            EnvironmentLaw::Constant { .. } => true,
            EnvironmentLaw::Uniform { .. } => false,
            EnvironmentLaw::Bernoulli { p, a, b } => p == 0.0 || p == 1.0 || a == b,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            EnvironmentLaw::Constant { value } => value,
            EnvironmentLaw::Uniform { lo, hi } => 0.5 * (lo + hi),
            EnvironmentLaw::Bernoulli { p, a, b } => (1.0 - p) * a + p * b,
        }
    }

    /// `1 / E[1/a]`; a lower bound for the effective coefficient.
    pub fn harmonic_mean(&self) -> f64 {
        match *self {
            EnvironmentLaw::Constant { value } => value,
            EnvironmentLaw::Uniform { lo, hi } => (hi - lo) / (hi / lo).ln(),
            EnvironmentLaw::Bernoulli { p, a, b } => 1.0 / ((1.0 - p) / a + p / b),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            EnvironmentLaw::Constant { .. } => 0.0,
            EnvironmentLaw::Uniform { lo, hi } => (hi - lo).powi(2) / 12.0,
            EnvironmentLaw::Bernoulli { p, a, b } => p * (1.0 - p) * (b - a).powi(2),
        }
    }

    /// Distribution function, used for goodness-of-fit checks.
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            EnvironmentLaw::Constant { value } => (x >= value) as u8 as f64,
            EnvironmentLaw::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            EnvironmentLaw::Bernoulli { p, a, b } => {
                let mut c = 0.0;
                if x >= a {
                    c += 1.0 - p;
                }
                if x >= b {
                    c += p;
                }
                c
            }
        }
    }

    /// Checks that every atom lies in `(1, Lambda]`, or `[1, Lambda]` when
    /// `allow_boundary_atom` is set.
    pub fn validate(&self, allow_boundary_atom: bool) -> Result<()> {
        let lower_ok = |v: f64| {
            v.is_finite() && (v > 1.0 || (allow_boundary_atom && v == 1.0))
        };
        match *self {
            EnvironmentLaw::Constant { value } => {
                if !lower_ok(value) {
                    return Err(Error::InvalidLaw(format!("constant {value} is not above 1")));
                }
            }
            EnvironmentLaw::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
                    return Err(Error::InvalidLaw(format!("uniform bounds need lo < hi, got ({lo}, {hi})")));
                }
                // the lower endpoint carries no mass
                if lo < 1.0 {
                    return Err(Error::InvalidLaw(format!("uniform lower bound {lo} is below 1")));
                }
            }
            EnvironmentLaw::Bernoulli { p, a, b } => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidLaw(format!("probability {p} outside [0, 1]")));
                }
                for atom in [a, b] {
                    if !lower_ok(atom) {
                        return Err(Error::InvalidLaw(format!("atom {atom} is not above 1")));
                    }
                }
            }
        }
        Ok(())
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            EnvironmentLaw::Constant { value } => value,
            EnvironmentLaw::Uniform { lo, hi } => {
                // open at lo
                let u: f64 = 1.0 - rng.random::<f64>();
                lo + (hi - lo) * u
            }
            EnvironmentLaw::Bernoulli { p, a, b } => {
                if rng.random::<f64>() < p {
                    b
                } else {
                    a
                }
            }
        }
    }
}

impl fmt::Display for EnvironmentLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            EnvironmentLaw::Constant { value } => write!(f, "constant({value})"),
            EnvironmentLaw::Uniform { lo, hi } => write!(f, "uniform({lo},{hi})"),
            EnvironmentLaw::Bernoulli { p, a, b } => write!(f, "bernoulli({p},{a},{b})"),
        }
    }
}

impl FromStr for EnvironmentLaw {
    type Err = Error;

    /// Parses `constant(c)`, `uniform(lo,hi)` or `bernoulli(p,a,b)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidLaw(format!("cannot parse law '{s}'"));
        let open = s.find('(').ok_or_else(bad)?;
        if !s.ends_with(')') {
            return Err(bad());
        }
        let name = s[..open].trim().to_ascii_lowercase();
        let args: Vec<f64> = s[open + 1..s.len() - 1]
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        match (name.as_str(), args.as_slice()) {
            ("constant", [c]) => Ok(EnvironmentLaw::constant(*c)),
            ("uniform", [lo, hi]) => Ok(EnvironmentLaw::uniform(*lo, *hi)),
            ("bernoulli", [p, a, b]) => Ok(EnvironmentLaw::bernoulli(*p, *a, *b)),
            _ => Err(bad()),
        }
    }
}

/// Edge weights of one environment on a torus grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Conductances {
    grid: TorusGrid,
    ellipticity: f64,
    allow_boundary: bool,
    values: Vec<f64>,
}

impl Conductances {
    /// Builds an environment from axis-major weights, checking every weight
    /// against `(1, ellipticity]` (closed at 1 when `allow_boundary`).
    pub fn new(
        grid: TorusGrid,
        values: Vec<f64>,
        ellipticity: f64,
        allow_boundary: bool,
    ) -> Result<Self> {
        if values.len() != grid.len() * grid.dim() {
            return Err(Error::ShapeMismatch(format!(
                "{} edge weights for {} edges",
                values.len(),
                grid.len() * grid.dim()
            )));
        }
        let c = Conductances {
            grid,
            ellipticity,
            allow_boundary,
            values,
        };
        c.check_ellipticity()?;
        Ok(c)
    }

    pub fn constant(grid: TorusGrid, value: f64) -> Result<Self> {
        Conductances::new(grid, vec![value; grid.len() * grid.dim()], value, true)
    }

    /// Re-validates uniform ellipticity.
    pub fn check_ellipticity(&self) -> Result<()> {
        for (edge, &v) in self.values.iter().enumerate() {
            let above = v > 1.0 || (self.allow_boundary && v == 1.0);
            if !(v.is_finite() && above && v <= self.ellipticity) {
                return Err(Error::Ellipticity {
                    edge,
                    value: v,
                    lower: 1.0,
                    upper: self.ellipticity,
                });
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn ellipticity(&self) -> f64 {
        self.ellipticity
    }

    pub fn allows_boundary(&self) -> bool {
        self.allow_boundary
    }

    /// Axis-major edge weights.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Weights of the edges along `axis`, indexed by base site.
    pub fn axis(&self, axis: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values[axis * n..(axis + 1) * n]
    }

    /// Weight of the edge `{x, x + e_axis}` with `x` the given site.
    #[inline]
    pub fn get(&self, site: usize, axis: usize) -> f64 {
        self.values[axis * self.grid.len() + site]
    }

    /// Weight of the edge `{x, x + e_axis}` for any `x` in `Z^d`, reading the
    /// environment as periodically tiled.
    pub fn weight_periodic(&self, coords: &[i64], axis: usize) -> f64 {
        self.get(self.grid.site(coords), axis)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn is_constant(&self) -> bool {
        self.values.iter().all(|&v| v == self.values[0])
    }

    /// Restriction to a smaller window: the edge `{x, x + e_i}` of the target
    /// torus takes the weight of the ambient edge `{x, x + e_i}`, so wrapping
    /// edges inherit the weight of the edge leaving the window.
    pub fn project(&self, side: usize) -> Result<Conductances> {
        let target = TorusGrid::new(side, self.grid.dim())?;
        if target.lo() < self.grid.lo() || target.hi() > self.grid.hi() {
            return Err(Error::ShapeMismatch(format!(
                "cannot project a side-{} environment onto side {side}",
                self.grid.side()
            )));
        }
        let n = target.len();
        let mut values = Vec::with_capacity(n * target.dim());
        for axis in 0..target.dim() {
            for site in 0..n {
                values.push(self.weight_periodic(&target.coords(site), axis));
            }
        }
        Conductances::new(target, values, self.ellipticity, self.allow_boundary)
    }

    /// Periodic tiling onto a larger torus whose side is a multiple of ours.
    pub fn extend(&self, side: usize) -> Result<Conductances> {
        if !side.is_multiple_of(self.grid.side()) {
            return Err(Error::ShapeMismatch(format!(
                "cannot tile side {} onto side {side}",
                self.grid.side()
            )));
        }
        let target = TorusGrid::new(side, self.grid.dim())?;
        let n = target.len();
        let mut values = Vec::with_capacity(n * target.dim());
        for axis in 0..target.dim() {
            for site in 0..n {
                values.push(self.weight_periodic(&target.coords(site), axis));
            }
        }
        Conductances::new(target, values, self.ellipticity, self.allow_boundary)
    }

    /// `out = -div(a grad f)` with the `N^2` normalization, on raw arrays.
    ///
    /// Written in gather form, `out(x) = N^2 sum_i [a(x,i)(f(x) - f(x+e_i)) + a(x-e_i,i)(f(x) - f(x-e_i))]`,
    /// so every inner loop runs over contiguous rows.
    pub fn apply_into(&self, f: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        let n = g.len();
        let side = g.side();
        assert_eq!(f.len(), n);
        assert_eq!(out.len(), n);
        let scale = (side * side) as f64;
        out.iter_mut().for_each(|v| *v = 0.0);
        for axis in 0..g.dim() {
            let a = self.axis(axis);
            let s = g.stride(axis);
            let block = side * s;
            for base in (0..n).step_by(block) {
                let fb = &f[base..base + block];
                let ab = &a[base..base + block];
                let ob = &mut out[base..base + block];
                if s == 1 {
                    add_line(ob, fb, ab);
                } else {
                    for p in 0..side {
                        let fwd = if p + 1 == side { 0 } else { p + 1 };
                        let back = if p == 0 { side - 1 } else { p - 1 };
                        let (f0, ff, fbk) = (&fb[p * s..p * s + s], &fb[fwd * s..fwd * s + s], &fb[back * s..back * s + s]);
                        let (a0, abk) = (&ab[p * s..p * s + s], &ab[back * s..back * s + s]);
                        let o = &mut ob[p * s..p * s + s];
                        for t in 0..s {
                            o[t] += a0[t] * (f0[t] - ff[t]) + abk[t] * (f0[t] - fbk[t]);
                        }
                    }
                }
            }
        }
        out.iter_mut().for_each(|v| *v *= scale);
    }

    /// `-div(a_N grad f)(x) = N^2 sum_{y ~ x} a_{xy} (f(x) - f(y))`.
    pub fn apply(&self, f: &LatticeField<f64>) -> Result<LatticeField<f64>> {
        if f.grid() != &self.grid {
            return Err(Error::ShapeMismatch(format!(
                "field on {:?} but environment on {:?}",
                f.grid(),
                self.grid
            )));
        }
        let mut out = vec![0.0; self.grid.len()];
        self.apply_into(f.values(), &mut out);
        LatticeField::new(self.grid, out)
    }

    /// Writes the `HFENV1` binary dump.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(ENV_MAGIC)?;
        w.write_all(&(self.grid.dim() as u64).to_le_bytes())?;
        w.write_all(&(self.grid.side() as u64).to_le_bytes())?;
        w.write_all(&self.ellipticity.to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads an `HFENV1` dump. Weights are validated against `[1, Lambda]`.
    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 6];
        r.read_exact(&mut magic)?;
        if &magic != ENV_MAGIC {
            return Err(Error::Format("not an HFENV1 environment dump".into()));
        }
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let dim = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let side = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let ellipticity = f64::from_le_bytes(word);
        let grid = TorusGrid::new(side, dim)?;
        let mut values = Vec::with_capacity(grid.len() * dim);
        for _ in 0..grid.len() * dim {
            r.read_exact(&mut word)?;
            values.push(f64::from_le_bytes(word));
        }
        Conductances::new(grid, values, ellipticity, true)
    }
}

/// Draws i.i.d. edge weights from `law`.
///
/// Each run of `N` consecutive base sites along one axis gets its own stream
/// derived from `(seed, axis, block)`, so the result depends only on
/// `(law, grid, seed)`.
pub fn sample_environment(law: &EnvironmentLaw, grid: &TorusGrid, seed: Seed) -> Result<Conductances> {
    sample_environment_with(law, grid, seed, true)
}

pub fn sample_environment_with(
    law: &EnvironmentLaw,
    grid: &TorusGrid,
    seed: Seed,
    allow_boundary_atom: bool,
) -> Result<Conductances> {
    law.validate(allow_boundary_atom)?;
    let n = grid.len();
    let side = grid.side();
    let mut values = vec![0.0; n * grid.dim()];
    let env_seed = seed.derive(tags::ENVIRONMENT);
    values
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(axis, chunk)| {
            for (block, run) in chunk.chunks_mut(side).enumerate() {
                let mut rng = env_seed.derive_path(&[axis as u64, block as u64]).rng();
                for v in run {
                    *v = law.draw(&mut rng);
                }
            }
        });
    Conductances::new(*grid, values, law.ellipticity(), allow_boundary_atom)
}

/// One periodic line along the fastest axis.
fn add_line(o: &mut [f64], f: &[f64], a: &[f64]) {
    let m = f.len();
    if m == 2 {
        o[0] += a[0] * (f[0] - f[1]) + a[1] * (f[0] - f[1]);
        o[1] += a[1] * (f[1] - f[0]) + a[0] * (f[1] - f[0]);
        return;
    }
    o[0] += a[0] * (f[0] - f[1]) + a[m - 1] * (f[0] - f[m - 1]);
    o[m - 1] += a[m - 1] * (f[m - 1] - f[0]) + a[m - 2] * (f[m - 1] - f[m - 2]);
    let inner = &mut o[1..m - 1];
    let (fm, f0, fp) = (&f[..m - 2], &f[1..m - 1], &f[2..]);
    let (am, a0) = (&a[..m - 2], &a[1..m - 1]);
    for t in 0..m - 2 {
        inner[t] += a0[t] * (f0[t] - fp[t]) + am[t] * (f0[t] - fm[t]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, d: usize) -> TorusGrid {
        TorusGrid::new(n, d).unwrap()
    }

    #[test]
    fn constant_law_fills_every_edge() {
        let a = sample_environment(&EnvironmentLaw::constant(1.5), &grid(5, 2), Seed(1)).unwrap();
        assert!(a.values().iter().all(|&v| v == 1.5));
        assert_eq!(a.values().len(), 50);
    }

    #[test]
    fn degenerate_laws_are_rejected() {
        let g = grid(4, 2);
        for law in [
            EnvironmentLaw::uniform(2.0, 1.5),
            EnvironmentLaw::uniform(0.5, 2.0),
            EnvironmentLaw::bernoulli(1.5, 1.0, 2.0),
            EnvironmentLaw::bernoulli(0.5, 0.9, 2.0),
            EnvironmentLaw::constant(0.5),
            EnvironmentLaw::constant(f64::NAN),
        ] {
            assert!(sample_environment(&law, &g, Seed(0)).is_err(), "{law}");
        }
        // the atom at exactly 1 needs the boundary flag
        let ber = EnvironmentLaw::bernoulli(0.5, 1.0, 2.0);
        assert!(sample_environment_with(&ber, &g, Seed(0), false).is_err());
        assert!(sample_environment_with(&ber, &g, Seed(0), true).is_ok());
        assert!(sample_environment_with(&EnvironmentLaw::constant(1.0), &g, Seed(0), false).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let law = EnvironmentLaw::uniform(1.0, 2.0);
        let g = grid(16, 2);
        let a = sample_environment(&law, &g, Seed(9)).unwrap();
        let b = sample_environment(&law, &g, Seed(9)).unwrap();
        let c = sample_environment(&law, &g, Seed(10)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.min() > 1.0 && a.max() <= 2.0);
    }

    #[test]
    fn bernoulli_edge_mean_matches_law() {
        let delta = 0.25;
        let law = EnvironmentLaw::bernoulli(0.5, 1.0 + delta, 2.0);
        let a = sample_environment(&law, &grid(64, 2), Seed(3)).unwrap();
        let m = a.values().len() as f64;
        let se = (law.variance() / m).sqrt();
        assert!((a.mean() - (1.5 + delta / 2.0)).abs() < 3.0 * se);
    }

    #[test]
    fn law_strings_round_trip() {
        for law in [
            EnvironmentLaw::constant(1.5),
            EnvironmentLaw::uniform(1.0, 2.0),
            EnvironmentLaw::bernoulli(0.5, 1.0, 2.0),
        ] {
            assert_eq!(law.to_string().parse::<EnvironmentLaw>().unwrap(), law);
        }
        assert!("gauss(1)".parse::<EnvironmentLaw>().is_err());
        assert!("uniform(1,2".parse::<EnvironmentLaw>().is_err());
    }

    #[test]
    fn projection_after_extension_is_identity() {
        let g = grid(4, 2);
        let a = sample_environment(&EnvironmentLaw::uniform(1.0, 3.0), &g, Seed(5)).unwrap();
        for big in [4usize, 8, 12] {
            let ext = a.extend(big).unwrap();
            assert_eq!(ext.project(4).unwrap(), a);
        }
        assert!(a.extend(6).is_err());
    }

    #[test]
    fn extension_is_periodic() {
        let a = sample_environment(&EnvironmentLaw::uniform(1.0, 3.0), &grid(4, 2), Seed(6)).unwrap();
        let ext = a.extend(12).unwrap();
        for x in -6i64..6 {
            for y in -6i64..6 {
                for axis in 0..2 {
                    let w = ext.weight_periodic(&[x, y], axis);
                    assert_eq!(w, ext.weight_periodic(&[x + 4, y], axis));
                    assert_eq!(w, a.weight_periodic(&[x, y], axis));
                }
            }
        }
    }

    #[test]
    fn projection_keeps_interior_edges() {
        let big = sample_environment(&EnvironmentLaw::uniform(1.0, 3.0), &grid(10, 2), Seed(7)).unwrap();
        let small = big.project(4).unwrap();
        let back = small.extend(8).unwrap();
        let g4 = grid(4, 2);
        for site in 0..g4.len() {
            let x = g4.coords(site);
            for axis in 0..2 {
                let mut y = x.clone();
                y[axis] += 1;
                // the wrapping edge keeps the weight of the edge leaving the window
                assert_eq!(small.get(site, axis), big.weight_periodic(&x, axis));
                if g4.contains_coord(y[axis]) {
                    assert_eq!(back.weight_periodic(&x, axis), big.weight_periodic(&x, axis));
                }
            }
        }
        assert!(small.project(6).is_err());
    }

    #[test]
    fn unit_conductances_give_the_graph_laplacian() {
        let g = grid(5, 2);
        let a = Conductances::constant(g, 1.0).unwrap();
        let f = LatticeField::from_fn(g, |s| ((s * 7919) % 13) as f64 - 3.0);
        let af = a.apply(&f).unwrap();
        let n2 = 25.0;
        for s in 0..g.len() {
            let lap: f64 = g.neighbors(s).iter().map(|&y| f.get(y) - f.get(s)).sum();
            assert!((af.get(s) + n2 * lap).abs() < 1e-10);
        }
        let c = a.apply(&LatticeField::constant(g, 2.5)).unwrap();
        assert!(c.max_abs() < 1e-12);
    }

    #[test]
    fn operator_output_is_mean_zero() {
        let g = grid(6, 3);
        let a = sample_environment(&EnvironmentLaw::uniform(1.0, 4.0), &g, Seed(2)).unwrap();
        let f = LatticeField::from_fn(g, |s| (s as f64).sin() + 3.0);
        let af = a.apply(&f).unwrap();
        assert!(af.mean().abs() < 1e-10 * af.max_abs());
        assert!(a.apply(&LatticeField::zeros(grid(5, 3))).is_err());
    }

    #[test]
    fn dump_round_trip_and_bad_magic() {
        let a = sample_environment(&EnvironmentLaw::bernoulli(0.3, 1.0, 2.0), &grid(4, 3), Seed(8)).unwrap();
        let mut buf = Vec::new();
        a.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..6], ENV_MAGIC);
        assert_eq!(buf.len(), 6 + 24 + 8 * 64 * 3);
        assert_eq!(Conductances::read_from(buf.as_slice()).unwrap(), a);
        buf[0] = b'X';
        assert!(Conductances::read_from(buf.as_slice()).is_err());
    }
}

