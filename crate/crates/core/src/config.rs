//! TOML run configuration.
//!
//! Every key is optional. Unknown keys are rejected so typos surface as
//! configuration errors. The content hash is computed over the canonical
//! re-serialization, which is also what gets echoed next to the outputs, so
//! rerunning from an echoed config reproduces the hash.
//!
//! ```toml
//! [run]
//! seed = 7
//!
//! [grid]
//! dim = 2
//! side = 64
//! sides = [16, 32, 64, 128]
//!
//! [environment]
//! law = "bernoulli(0.5,1,2)"
//!
//! [experiment]
//! name = "bilap_error"
//! beta = 0.75
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::environment::EnvironmentLaw;
use crate::error::{Error, Result};
use crate::experiments::{AhomSource, ExperimentConfig};
use crate::grid::FourierIndex;
use crate::heatmap::Palette;
use crate::krylov::KrylovOptions;
use crate::sampler::{FieldKind, GffBackend};
use crate::solver::SolverOptions;
use crate::spectral::EigenvalueKind;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    /// Side for single-grid commands.
    pub side: usize,
    /// Ladder of sides for rate and covariance commands.
    pub sides: Vec<usize>,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            dim: 2,
            side: 64,
            sides: vec![16, 32, 64, 128],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvironmentSection {
    pub law: String,
    pub allow_boundary_atom: bool,
}

impl Default for EnvironmentSection {
    fn default() -> Self {
        EnvironmentSection {
            law: "bernoulli(0.5,1,2)".into(),
            allow_boundary_atom: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSection {
    pub kind: FieldKind,
    /// Free-field backend; spectral for homogeneous fields and Krylov otherwise when absent.
    pub backend: Option<GffBackend>,
    pub palette: Palette,
}

impl Default for SampleSection {
    fn default() -> Self {
        SampleSection {
            kind: FieldKind::BilapEnv,
            backend: None,
            palette: Palette::Diverging,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AhomSection {
    /// Environments for the `ahom` command.
    pub replicates: usize,
    /// Fixed effective coefficient for experiments; estimated when absent.
    pub value: Option<f64>,
    /// Side of the experiment estimate (default: largest configured side).
    pub estimate_side: Option<usize>,
    pub estimate_replicates: usize,
}

impl Default for AhomSection {
    fn default() -> Self {
        AhomSection {
            replicates: 50,
            value: None,
            estimate_side: None,
            estimate_replicates: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateExperiment {
    PseudoEigen,
    BilapError,
    Discretization,
    /// `value = N^{synthetic_exponent}`, a self-test of the fitting pipeline.
    Synthetic,
}

impl std::str::FromStr for RateExperiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pseudo_eigen" => Ok(RateExperiment::PseudoEigen),
            "bilap_error" => Ok(RateExperiment::BilapError),
            "discretization" => Ok(RateExperiment::Discretization),
            "synthetic" => Ok(RateExperiment::Synthetic),
            other => Err(Error::Config(format!("unknown rate experiment '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: RateExperiment,
    pub beta: f64,
    pub modes: Vec<Vec<i64>>,
    pub replicates: usize,
    pub environments: usize,
    pub eigenvalues: EigenvalueKind,
    pub cutoff_factor: usize,
    pub mc_side: Option<usize>,
    /// Allowed distance of the fitted slope from its expected value.
    pub slope_tolerance: f64,
    pub synthetic_exponent: f64,
    /// Band, in standard errors, for covariance checks.
    pub z_band: f64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            name: RateExperiment::PseudoEigen,
            beta: 0.75,
            modes: vec![vec![1, 0]],
            replicates: 64,
            environments: 8,
            eigenvalues: EigenvalueKind::Continuum,
            cutoff_factor: 2,
            mc_side: None,
            slope_tolerance: 0.3,
            synthetic_exponent: -2.0,
            z_band: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FigureSection {
    pub side: usize,
}

impl Default for FigureSection {
    fn default() -> Self {
        FigureSection { side: 150 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub grid: GridSection,
    pub environment: EnvironmentSection,
    pub solver: SolverOptions,
    pub krylov: KrylovOptions,
    pub sample: SampleSection,
    pub ahom: AhomSection,
    pub experiment: ExperimentSection,
    pub figure: FigureSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Canonical TOML text; the echoed form of the configuration.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Hex SHA-256 of `"blob <len>\0" + canonical text`.
    pub fn hash(&self) -> Result<String> {
        let text = self.to_toml()?;
        let mut h = Sha256::new();
        h.update(format!("blob {}\0", text.len()).as_bytes());
        h.update(text.as_bytes());
        Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn law(&self) -> Result<EnvironmentLaw> {
        let law: EnvironmentLaw = self
            .environment
            .law
            .parse()
            .map_err(|e: Error| Error::Config(e.to_string()))?;
        law.validate(self.environment.allow_boundary_atom)
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(law)
    }

    pub fn modes(&self) -> Vec<FourierIndex> {
        self.experiment.modes.iter().cloned().map(FourierIndex).collect()
    }

    pub fn ahom_source(&self) -> AhomSource {
        match self.ahom.value {
            Some(v) => AhomSource::Value(v),
            None => AhomSource::Estimate {
                side: self.ahom.estimate_side,
                replicates: self.ahom.estimate_replicates,
            },
        }
    }

    pub fn experiment_config(&self) -> Result<ExperimentConfig> {
        Ok(ExperimentConfig {
            dim: self.grid.dim,
            beta: self.experiment.beta,
            law: self.law()?,
            sides: self.grid.sides.clone(),
            modes: self.modes(),
            replicates: self.experiment.replicates,
            environments: self.experiment.environments,
            seed: self.run.seed,
            ahom: self.ahom_source(),
            solver: self.solver,
            krylov: self.krylov,
            backend: self.sample.backend.unwrap_or(GffBackend::Krylov),
            eigenvalues: self.experiment.eigenvalues,
            cutoff_factor: self.experiment.cutoff_factor,
            mc_side: self.experiment.mc_side,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_and_hash_is_stable() {
        let c = RunConfig::default();
        let text = c.to_toml().unwrap();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash().unwrap(), c.hash().unwrap());
        assert_eq!(c.hash().unwrap().len(), 64);
    }

    #[test]
    fn partial_files_fill_defaults_and_typos_fail() {
        let c = RunConfig::from_toml("[run]\nseed = 9\n[environment]\nlaw = \"uniform(1,2)\"\n").unwrap();
        assert_eq!(c.run.seed, 9);
        assert_eq!(c.grid, GridSection::default());
        assert_eq!(c.law().unwrap(), EnvironmentLaw::uniform(1.0, 2.0));
        assert!(RunConfig::from_toml("[run]\nsede = 9\n").is_err());
        let bad = RunConfig::from_toml("[environment]\nlaw = \"uniform(2,1)\"\n").unwrap();
        assert!(matches!(bad.law(), Err(Error::Config(_))));
    }

    #[test]
    fn hash_changes_with_content() {
        let mut c = RunConfig::default();
        let h0 = c.hash().unwrap();
        c.run.seed = 1;
        assert_ne!(c.hash().unwrap(), h0);
    }
}
