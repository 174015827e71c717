//! Threshold dynamics for multiphase mean-curvature flow on the periodic
//! unit torus with arbitrary surface tensions and mobilities.

pub mod benchmarks;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod tension;

pub use dynamics::{
    nonlocal_energy, run_simulation, run_simulation_with, step_eo, step_es, step_mbo, Algorithm, RecordOptions,
    RunReport, Simulator, StepContext,
};
pub use error::{Error, Result};
pub use grid::{make_partition, volumes, CosineConvolver, GridSpec, Partition, ScalarField, SpectralConvolver};
pub use kernel::{kernel_coefficients, select_alpha_beta, AlphaBetaPolicy, AlphaBetaSelection, KernelFamily};
pub use tension::{MobilityMatrix, TensionMatrix};
