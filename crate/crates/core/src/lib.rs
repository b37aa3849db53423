//! Numerical homogenization of parabolic equations with large Gaussian random potentials.

pub mod error;
pub mod evolution;
pub mod experiment;
pub mod graphs;
pub mod grid;
pub mod medium;
pub mod quadrature;
pub mod random_field;
pub mod spectrum;
pub mod stats;

pub use error::{Error, Result};
pub use evolution::{solve_random, EvolutionParams, PropagatorSpec, Snapshot};
pub use experiment::{ExperimentConfig, ExperimentKind, Setup};
pub use graphs::{GraphFilter, GraphPairing, MomentProblem};
pub use grid::{Field, FourierPlan, GridSpec, SpectralField};
pub use medium::MediumConstants;
pub use random_field::{AlphaRule, FieldSample};
pub use spectrum::PowerSpectrum;
pub use stats::{EnsembleStats, RateFit};
