//! Bi-Laplacian fields from one shared noise across several environments.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::environment::{sample_environment, EnvironmentLaw};
use crate::error::{Error, Result};
use crate::field::LatticeField;
use crate::grid::TorusGrid;
use crate::sampler::{sample_bilaplacian, sample_noise, FieldSample};
use crate::seed::{tags, Seed};
use crate::solver::{Medium, SolverOptions};

/// One-sided sign-agreement test of positive association between two fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignTest {
    pub agree: usize,
    pub sites: usize,
    /// Normal approximation `(agree - n/2) / (sqrt(n)/2)`.
    pub z: f64,
    pub p_value: f64,
    pub level: f64,
    pub passed: bool,
}

pub fn sign_test(a: &LatticeField<f64>, b: &LatticeField<f64>, level: f64) -> Result<SignTest> {
    a.ensure_same_grid(b)?;
    let pairs: Vec<(f64, f64)> = a
        .values()
        .iter()
        .zip(b.values())
        .filter(|(x, y)| **x != 0.0 && **y != 0.0)
        .map(|(x, y)| (*x, *y))
        .collect();
    let n = pairs.len();
    if n == 0 {
        return Err(Error::InvalidArgument("no sites with non-zero values".into()));
    }
    let agree = pairs.iter().filter(|(x, y)| x.signum() == y.signum()).count();
    let z = (agree as f64 - n as f64 / 2.0) / ((n as f64).sqrt() / 2.0);
    let p_value = 1.0 - Normal::standard().cdf(z);
    Ok(SignTest {
        agree,
        sites: n,
        z,
        p_value,
        level,
        passed: p_value < level,
    })
}

#[derive(Debug, Clone)]
pub struct Panel {
    pub label: String,
    pub law: EnvironmentLaw,
    pub environment_seed: u64,
    pub sample: FieldSample,
}

#[derive(Debug, Clone)]
pub struct FigureOne {
    pub noise_seed: u64,
    pub panels: Vec<Panel>,
    /// Tests of each Bernoulli panel against the constant panel.
    pub sign_tests: Vec<(String, SignTest)>,
}

impl FigureOne {
    pub fn passed(&self) -> bool {
        self.sign_tests.iter().all(|(_, t)| t.passed)
    }
}

/// The four panels: constant 3/2, uniform(1,2), and two draws of 1 + Bernoulli(1/2).
pub fn figure_one_panels() -> Vec<(&'static str, EnvironmentLaw, u64)> {
    vec![
        ("constant", EnvironmentLaw::constant(1.5), 0),
        ("uniform", EnvironmentLaw::uniform(1.0, 2.0), 1),
        ("bernoulli_a", EnvironmentLaw::bernoulli(0.5, 1.0, 2.0), 2),
        ("bernoulli_b", EnvironmentLaw::bernoulli(0.5, 1.0, 2.0), 3),
    ]
}

pub fn figure_one(side: usize, seed: Seed, opts: &SolverOptions) -> Result<FigureOne> {
    let grid = TorusGrid::new(side, 2)?;
    let noise_seed = seed.derive(tags::NOISE);
    let noise = sample_noise(&grid, noise_seed);
    let mut panels = Vec::new();
    for (label, law, index) in figure_one_panels() {
        let env_seed = seed.derive_path(&[tags::ENVIRONMENT, index]);
        let a = sample_environment(&law, &grid, env_seed)?;
        let mut sample = sample_bilaplacian(Medium::Environment(&a), &noise, opts)?;
        sample.environment_seed = Some(env_seed.0);
        sample.noise_seed = Some(noise_seed.0);
        panels.push(Panel {
            label: label.to_string(),
            law,
            environment_seed: env_seed.0,
            sample,
        });
    }
    let reference = &panels[0].sample.field;
    let sign_tests = panels
        .iter()
        .filter(|p| p.label.starts_with("bernoulli"))
        .map(|p| Ok((p.label.clone(), sign_test(&p.sample.field, reference, 0.01)?)))
        .collect::<Result<_>>()?;
    Ok(FigureOne {
        noise_seed: noise_seed.0,
        panels,
        sign_tests,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_test_detects_association() {
        let g = TorusGrid::new(32, 2).unwrap();
        let a = sample_noise(&g, Seed(1));
        let b = sample_noise(&g, Seed(2));
        let mixed = a.add(&b.scaled(0.5)).unwrap();
        assert!(sign_test(&mixed, &a, 0.01).unwrap().passed);
        let indep = sign_test(&b, &a, 0.01).unwrap();
        assert!(indep.z.abs() < 4.0);
        let flipped = sign_test(&a.scaled(-1.0), &a, 0.01).unwrap();
        assert_eq!(flipped.agree, 0);
        assert!(!flipped.passed);
    }
}
