pub mod cli;
pub mod config;
pub mod environment;
pub mod error;
pub mod experiments;
pub mod field;
pub mod figure;
pub mod heatmap;
pub mod grid;
pub mod homogenization;
pub mod krylov;
pub mod sampler;
pub mod seed;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use field::{ComplexLatticeField, LatticeField, Scalar, SpectralField};
pub use grid::{FourierIndex, TorusGrid};
pub use seed::Seed;
