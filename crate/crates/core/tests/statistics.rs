//! Distributional checks with fixed seeds, each at the 1% level or a 4-SE band.

use hfield::environment::{sample_environment, EnvironmentLaw};
use hfield::homogenization::estimate_ahom;
use hfield::sampler::{GffBackend, GffSampler};
use hfield::solver::{green_column, Medium, SolverOptions};
use hfield::spectral::{dft, eigenvalue_discrete};
use hfield::{Seed, TorusGrid};
use statrs::distribution::{ContinuousCDF, Normal};

/// Two-sided one-sample Kolmogorov-Smirnov statistic `sqrt(n) * D_n`.
fn ks_statistic(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let d = xs.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    });
    d * n.sqrt()
}

/// Asymptotic 1% critical value of `sqrt(n) * D_n`.
const KS_CRITICAL_1PCT: f64 = 1.628;

#[test]
fn uniform_edge_weights_follow_their_law() {
    let law = EnvironmentLaw::uniform(1.0, 2.0);
    let a = sample_environment(&law, &TorusGrid::new(128, 2).unwrap(), Seed(11)).unwrap();
    let ks = ks_statistic(a.values().to_vec(), |x| law.cdf(x));
    assert!(ks < KS_CRITICAL_1PCT, "KS statistic {ks}");
}

#[test]
fn bernoulli_edge_frequencies_match_p() {
    let a = sample_environment(&EnvironmentLaw::bernoulli(0.3, 1.0, 2.0), &TorusGrid::new(128, 2).unwrap(), Seed(12))
        .unwrap();
    let n = a.values().len() as f64;
    let high = a.values().iter().filter(|&&v| v == 2.0).count() as f64;
    assert_eq!(a.values().iter().filter(|&&v| v != 1.0 && v != 2.0).count(), 0);
    let se = (0.3 * 0.7 / n).sqrt();
    assert!((high / n - 0.3).abs() < 4.0 * se, "frequency {}", high / n);
}

#[test]
fn effective_coefficient_is_monotone_in_the_law_and_bracketed() {
    let g = TorusGrid::new(32, 2).unwrap();
    let opts = SolverOptions::default();
    let mut previous = 0.0;
    for p in [0.2, 0.5, 0.8] {
        let law = EnvironmentLaw::bernoulli(p, 1.0, 2.0);
        let e = estimate_ahom(&law, &g, 16, Seed(13), &opts).unwrap();
        assert!(e.mean > previous, "p = {p}: {} after {previous}", e.mean);
        assert!(law.harmonic_mean() - 4.0 * e.stderr <= e.mean && e.mean <= law.mean() + 4.0 * e.stderr);
        previous = e.mean;
    }
}

#[test]
fn homogeneous_free_field_spectrum_is_chi_square() {
    // with the normalized inner product E|<Xi, phi_k>|^2 = 1 / (N^d lambda_k), so the rescaled
    // sum over modes and samples is chi-square with M (N^d - 1) degrees of freedom
    let g = TorusGrid::new(16, 2).unwrap();
    let sampler = GffSampler::new(Medium::Homogeneous(g), GffBackend::Spectral).unwrap();
    let m = 200;
    let mut t = 0.0;
    for s in 0..m {
        let spec = dft(&sampler.sample(Seed(1000 + s)).unwrap().field);
        for (k, c) in spec.iter() {
            if !k.is_zero() {
                t += g.len() as f64 * eigenvalue_discrete(16, &k) * c.norm_sqr();
            }
        }
    }
    let dof = (m * (g.len() as u64 - 1)) as f64;
    assert!((t - dof).abs() < 4.0 * (2.0 * dof).sqrt(), "T = {t}, dof = {dof}");
}

#[test]
fn environment_free_field_marginals_are_normal_with_green_variance() {
    let g = TorusGrid::new(8, 2).unwrap();
    let a = sample_environment(&EnvironmentLaw::bernoulli(0.5, 1.0, 2.0), &g, Seed(14)).unwrap();
    let sampler = GffSampler::new(Medium::Environment(&a), GffBackend::Dense).unwrap();
    let site = 27;
    let var = green_column(Medium::Environment(&a), site, &SolverOptions::with_tol(1e-12)).unwrap().get(site);
    let xs: Vec<f64> = (0..2000).map(|s| sampler.sample(Seed(s)).unwrap().field.get(site) / var.sqrt()).collect();
    let normal = Normal::standard();
    let ks = ks_statistic(xs, |x| normal.cdf(x));
    assert!(ks < KS_CRITICAL_1PCT, "KS statistic {ks}");
}
