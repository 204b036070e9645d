//! Exact Gaussian simulation of an oscillator coupled to a finite bath with a
//! Rubin spectral density, with quantum Darwinism and fidelity
//! non-Markovianity diagnostics.
//!
//! Units have `ħ = 1`; entropies are in nats. Covariances use the interleaved
//! quadrature ordering `(x₁, p₁, x₂, p₂, ...)` and mode 0 is the system.

pub mod bath;
pub mod darwinism;
pub mod error;
pub mod evolution;
pub mod experiments;
pub mod gaussian;
mod linalg;
pub mod memory;

pub use bath::{ModelParams, NormalModeBasis, SpectralDensityParams, SymplecticPropagator};
pub use darwinism::{FragmentOrderings, FragmentSample, MutualInfoCurve, RedundancyTrace};
pub use error::{Error, Result};
pub use evolution::{DecoherenceRecord, ReducedChannel, Simulation};
pub use experiments::{CsvTable, ExperimentConfig, OracleReport, SweepRow};
pub use gaussian::{GaussianState, ModeSet, StiffQuadrature, SymplecticForm};
pub use memory::{NMResult, ProbePair};
