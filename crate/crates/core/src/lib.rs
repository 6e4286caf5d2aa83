//! Variational clustering on the polarization of light.
//!
//! Data points are embedded as polarization states on the Poincaré sphere by
//! a pair of preparation waveplates, transformed by a variational stack of
//! quarter/half-wave plates, and classified by minimizing a clustering cost
//! built from pairwise distances and state fidelities. The crate provides the
//! exact Jones-calculus algebra, the feature-space embedding (analytic and
//! look-up-table), the cost function with self-consistent assignments, a
//! hybrid Monte-Carlo + steepest-descent optimizer, landscape scans, synthetic
//! blob datasets, and a simulated rotary-stage/polarimeter bench with a
//! newline-delimited JSON wire protocol.

pub mod circuit;
pub mod clustering;
pub mod datasets;
pub mod embedding;
pub mod error;
pub mod hardware;
pub mod landscape;
pub mod optimizer;
pub mod polarization;

pub use circuit::{CircuitParams, FidelityMatrix};
pub use clustering::{Assignment, Centroids, ClusterProblem, CostReport};
pub use datasets::{BlobSpec, DataPoint, Dataset, Layout};
pub use embedding::{EmbedMode, EmbeddingMap, LookUpTable, PlateAngles};
pub use error::{Error, Result};
pub use hardware::{DeviceConfig, DeviceState, PlateDevice, SimulatedDevice};
pub use landscape::{ScanResult, ScanSpec};
pub use optimizer::{OptimizerConfig, RunResult, Trace};
pub use polarization::{fidelity, JonesMatrix, JonesVector, SphereAngles, StokesVector};
